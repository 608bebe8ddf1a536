//! Fredholm determinants of trace-class integral operators on the real line,
//! and numerical verification of their large-window asymptotics
//!
//! ```text
//! det(I + K_α) ~ G(σ)^{2α} E(σ) det(I + K₁) det(I + K₂),   α → ∞,
//! ```
//!
//! for the Toda kernel family and the classical hard-window family.
//!
//! * [`kernels`]: the kernel families `k`, `K_α`, `K_±`, `K11`, `K22`.
//! * [`quadrature`]: composite Gauss–Legendre grids and half-line masks.
//! * [`fredholm`]: Nyström determinants and refinement error estimates.
//! * [`symbol`]: the symbol `σ = 1 + k̂`, the index check, and the
//!   Kac–Ahieser constants `G`, `E` by two routes.
//! * [`wienerhopf`]: the correction determinants `det(I + K₁)`,
//!   `det(I + K₂)` by direct solve and by coupling integration of a
//!   trace formula.
//! * [`sweep`]: α-sweeps, constants reports, self-test and report emission
//!   used by the `opdet` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod fredholm;
pub mod kernels;
pub mod linalg;
pub mod quadrature;
pub mod sweep;
pub mod symbol;
pub mod wienerhopf;

pub use error::{Error, Result};
pub use fredholm::{det_refined, fredholm_det, perturbed_inverse_det, DetResult};
pub use kernels::{Correction, Family, HalfSide, KernelSpec};
pub use quadrature::{build_composite, gauss_legendre, Grid, MaskSelector};
