//! The two built-in kernel families.
//!
//! Both families share the translation-invariant limit kernel
//! `k(d) = λ sech(d/2)`. They differ in how the windowed operator `K_α`
//! approaches the limit:
//!
//! * [`Family::Toda`]: smooth double-exponential shoulders at `|x| ≈ α`,
//!   `K_α(x,y) = λ exp(-(e^{x-α} + e^{-x-α} + e^{y-α} + e^{-y-α})) sech((x-y)/2)`.
//! * [`Family::Window`]: hard truncation `χ_(-α,α) K χ_(-α,α)`.
//!
//! Every kernel is evaluated so that `f(x, y)` and `f(y, x)` are bit-identical.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Toda,
    Window,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Toda => "toda",
            Family::Window => "window",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "toda" => Ok(Family::Toda),
            "window" => Ok(Family::Window),
            other => Err(Error::InvalidArgument(format!(
                "unknown family {other:?} (expected toda or window)"
            ))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which half-line limit operator: `K_+` lives on the left, `K_-` on the right.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfSide {
    Plus,
    Minus,
}

/// The trace-class differences `K11 = K_- - χ⁺Kχ⁺` and `K22 = K_+ - χ⁻Kχ⁻`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Correction {
    K11,
    K22,
}

impl Correction {
    pub fn mirror(self) -> Self {
        match self {
            Correction::K11 => Correction::K22,
            Correction::K22 => Correction::K11,
        }
    }
}

/// Half-line indicator with `0` on the plus side.
#[inline]
pub fn chi_plus(x: f64) -> bool {
    x >= 0.0
}

#[inline]
pub fn chi_minus(x: f64) -> bool {
    x < 0.0
}

#[inline]
fn in_open(x: f64, lo: f64, hi: f64) -> bool {
    lo < x && x < hi
}

/// `sech(|d|/2)`, written through `|d|` so that swapping arguments is exact.
#[inline]
fn sech_half(d: f64) -> f64 {
    1.0 / (0.5 * d.abs()).cosh()
}

/// A kernel family with its coupling `λ`. The window parameter `α` is passed
/// per call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: Family,
    pub lambda: f64,
}

impl KernelSpec {
    pub fn new(family: Family, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "coupling must be finite, got {lambda}"
            )));
        }
        Ok(Self { family, lambda })
    }

    pub fn toda(lambda: f64) -> Self {
        Self {
            family: Family::Toda,
            lambda,
        }
    }

    pub fn window(lambda: f64) -> Self {
        Self {
            family: Family::Window,
            lambda,
        }
    }

    /// The same family at a different coupling.
    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    /// Convolution limit kernel `k(d) = λ sech(d/2)`.
    #[inline]
    pub fn eval_limit(&self, d: f64) -> f64 {
        self.lambda * sech_half(d)
    }

    /// `K_α(x, y)`.
    pub fn eval_window_kernel(&self, alpha: f64, x: f64, y: f64) -> f64 {
        match self.family {
            Family::Toda => {
                let gx = (x - alpha).exp() + (-x - alpha).exp();
                let gy = (y - alpha).exp() + (-y - alpha).exp();
                self.lambda * (-(gx + gy)).exp() * sech_half(x - y)
            }
            Family::Window => {
                if in_open(x, -alpha, alpha) && in_open(y, -alpha, alpha) {
                    self.eval_limit(x - y)
                } else {
                    0.0
                }
            }
        }
    }

    /// `K_+(x, y)` or `K_-(x, y)`.
    pub fn eval_half_limit(&self, side: HalfSide, x: f64, y: f64) -> f64 {
        match (self.family, side) {
            (Family::Toda, HalfSide::Plus) => {
                self.lambda * (-(x.exp() + y.exp())).exp() * sech_half(x - y)
            }
            (Family::Toda, HalfSide::Minus) => {
                self.lambda * (-((-x).exp() + (-y).exp())).exp() * sech_half(x - y)
            }
            (Family::Window, HalfSide::Plus) => {
                if chi_minus(x) && chi_minus(y) {
                    self.eval_limit(x - y)
                } else {
                    0.0
                }
            }
            (Family::Window, HalfSide::Minus) => {
                if chi_plus(x) && chi_plus(y) {
                    self.eval_limit(x - y)
                } else {
                    0.0
                }
            }
        }
    }

    /// `χ⁺Kχ⁺` (for [`HalfSide::Minus`]) or `χ⁻Kχ⁻` (for [`HalfSide::Plus`]),
    /// i.e. the compressed limit kernel that `K_∓` is compared against.
    #[inline]
    pub fn eval_compressed_limit(&self, side: HalfSide, x: f64, y: f64) -> f64 {
        let inside = match side {
            HalfSide::Minus => chi_plus(x) && chi_plus(y),
            HalfSide::Plus => chi_minus(x) && chi_minus(y),
        };
        if inside {
            self.eval_limit(x - y)
        } else {
            0.0
        }
    }

    /// `K11(x, y)` or `K22(x, y)`.
    pub fn eval_correction_kernel(&self, which: Correction, x: f64, y: f64) -> f64 {
        if self.family == Family::Window {
            return 0.0;
        }
        let side = match which {
            Correction::K11 => HalfSide::Minus,
            Correction::K22 => HalfSide::Plus,
        };
        self.eval_half_limit(side, x, y) - self.eval_compressed_limit(side, x, y)
    }

    /// Truncation interval for a kernel such that the neglected diagonal tail
    /// mass is below `tol`.
    pub fn decay_radius(&self, which: KernelSelector, tol: f64) -> Result<Interval> {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must lie in (0, 1), got {tol}"
            )));
        }
        let lam = self.lambda.abs();
        let (left, right) = match which {
            KernelSelector::Limit => {
                // ∫_L^∞ 2|λ| e^{-d/2} dd = 4|λ| e^{-L/2}
                let r = 2.0 * (4.0 * lam / tol).ln().max(0.0);
                (r, r)
            }
            KernelSelector::Window { alpha } => {
                if alpha < 0.0 || !alpha.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "window parameter must be finite and non-negative, got {alpha}"
                    )));
                }
                match self.family {
                    Family::Window => (alpha, alpha),
                    Family::Toda => {
                        let r = alpha + double_exp_offset(lam, tol);
                        (r, r)
                    }
                }
            }
            KernelSelector::Correction(which) => match self.family {
                Family::Window => (0.0, 0.0),
                Family::Toda => {
                    // exponential tail on the half-line where K_∓ meets K,
                    // double-exponential on the other side.
                    let exp_side = (2.0 * lam / tol).ln().max(0.0);
                    let dexp_side = double_exp_offset(lam, tol);
                    match which {
                        Correction::K11 => (dexp_side, exp_side),
                        Correction::K22 => (exp_side, dexp_side),
                    }
                }
            },
        };
        Ok(Interval {
            lo: -left,
            hi: right,
        })
    }

    /// Decay metadata for the left and right tails of a kernel.
    pub fn decay_profile(&self, which: KernelSelector) -> [DecayProfile; 2] {
        use DecayKind::*;
        let compact = |side, r: f64| DecayProfile {
            side,
            kind: Compact,
            rate: 1.0,
            cutoff: Some(r),
        };
        let prof = |side, kind, rate| DecayProfile {
            side,
            kind,
            rate,
            cutoff: None,
        };
        match (self.family, which) {
            (_, KernelSelector::Limit) => [
                prof(TailSide::Left, Exponential, 0.5),
                prof(TailSide::Right, Exponential, 0.5),
            ],
            (Family::Window, KernelSelector::Window { alpha }) => [
                compact(TailSide::Left, alpha),
                compact(TailSide::Right, alpha),
            ],
            (Family::Toda, KernelSelector::Window { .. }) => [
                prof(TailSide::Left, DoubleExponential, 1.0),
                prof(TailSide::Right, DoubleExponential, 1.0),
            ],
            (Family::Window, KernelSelector::Correction(_)) => {
                [compact(TailSide::Left, 0.0), compact(TailSide::Right, 0.0)]
            }
            (Family::Toda, KernelSelector::Correction(Correction::K11)) => [
                prof(TailSide::Left, DoubleExponential, 1.0),
                prof(TailSide::Right, Exponential, 1.0),
            ],
            (Family::Toda, KernelSelector::Correction(Correction::K22)) => [
                prof(TailSide::Left, Exponential, 1.0),
                prof(TailSide::Right, DoubleExponential, 1.0),
            ],
        }
    }
}

/// Offset `L` solving `|λ| exp(-e^L) = tol`, floored at zero.
fn double_exp_offset(lam: f64, tol: f64) -> f64 {
    let r = (lam / tol).ln();
    if r > 1.0 {
        r.ln()
    } else {
        0.0
    }
}

/// Selects a kernel for [`KernelSpec::decay_radius`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSelector {
    /// The convolution profile `k(d)`, radius in `d`.
    Limit,
    Window {
        alpha: f64,
    },
    Correction(Correction),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailSide {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayKind {
    DoubleExponential,
    Exponential,
    Compact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayProfile {
    pub side: TailSide,
    pub kind: DecayKind,
    pub rate: f64,
    /// Support radius, present exactly when `kind` is [`DecayKind::Compact`].
    pub cutoff: Option<f64>,
}
