//! Scalar symbol calculus for convolution kernels.
//!
//! For a limit kernel `k(x - y)` the symbol is `σ(ξ) = 1 + k̂(ξ)` with
//! `k̂(ξ) = ∫ e^{ixξ} k(x) dx`. The inverse transform used for
//! `s = F⁻¹[log σ]` is
//!
//! ```text
//! s(x) = (2π)⁻¹ ∫ e^{-ixξ} log σ(ξ) dξ,
//! ```
//!
//! the convention under which `s(0) = log G ≈ (2π)⁻¹ ∫ k̂ dξ` to first order
//! in the coupling, and under which the integral and operator routes for `E`
//! agree.
//!
//! For `k(d) = λ sech(d/2)` the transform is `k̂(ξ) = 2πλ sech(πξ)`, so
//! `σ` first vanishes (at `ξ = 0`) when `λ = -1/(2π)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fredholm::kernel_matrix;
use crate::kernels::{KernelSelector, KernelSpec};
use crate::linalg::{Lu, Matrix};
use crate::quadrature::{composite_on, Grid};

pub const DEFAULT_XI_MAX: f64 = 16.0;
/// Odd, so that `ξ = 0` is a sample.
pub const DEFAULT_SAMPLES: usize = (1 << 14) + 1;
/// `|σ|` must stay above this for the index check to pass.
pub const DEFAULT_INDEX_FLOOR: f64 = 1e-6;
/// Largest admissible change of `arg σ` between adjacent samples.
pub const MAX_PHASE_STEP: f64 = PI / 2.0;
/// Upper end of the `x` range used for `log E`.
pub const DEFAULT_X_MAX: f64 = 80.0;

/// Closed form `2πλ sech(πξ)` of the transform of `λ sech(x/2)`.
pub fn hat_k_closed(spec: &KernelSpec, xi: f64) -> f64 {
    2.0 * PI * spec.lambda / (PI * xi).cosh()
}

/// `k̂(ξ)`; both families share the sech limit kernel, so this is the closed
/// form. [`hat_k_numeric`] is the quadrature it is checked against.
pub fn hat_k(spec: &KernelSpec, xi: f64) -> f64 {
    hat_k_closed(spec, xi)
}

/// `∫ e^{ixξ} k(x) dx` by composite Gauss–Legendre over the range where
/// `|k|` exceeds `1e-18`.
pub fn hat_k_numeric(spec: &KernelSpec, xi: f64) -> Complex64 {
    if spec.lambda == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let r = spec
        .decay_radius(KernelSelector::Limit, 1e-18)
        .expect("fixed tolerance is valid");
    fourier_integral(|x| spec.eval_limit(x), r.lo, r.hi, xi)
}

/// `∫_a^b e^{ixξ} f(x) dx` on unit-width panels of order 20, with extra
/// resolution when `|ξ|` makes the integrand oscillate.
pub fn fourier_integral<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, xi: f64) -> Complex64 {
    let width = (1.0f64).min(4.0 / xi.abs().max(1e-300));
    let grid = composite_on(a, b, width, 20).expect("valid interval");
    grid.nodes()
        .iter()
        .zip(grid.weights())
        .map(|(&x, &w)| {
            let (s, c) = (x * xi).sin_cos();
            Complex64::new(c, s) * (w * f(x))
        })
        .sum()
}

/// Uniform samples of `σ` on `[-Ξ, Ξ]` with unwrapping diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct SymbolData {
    pub xi_max: f64,
    pub step: f64,
    #[serde(skip)]
    pub xi: Vec<f64>,
    #[serde(skip)]
    pub sigma: Vec<Complex64>,
    /// `ln|σ| + i·(continuous arg σ)`.
    #[serde(skip)]
    pub log_sigma: Vec<Complex64>,
    pub min_abs: f64,
    /// Where `min_abs` is attained.
    pub argmin_xi: f64,
    /// Net unwrapped phase change divided by `2π`, rounded. Not meaningful
    /// when `zero_crossings` is non-empty.
    pub winding: i64,
    pub net_phase: f64,
    /// Locations (by linear interpolation) where `σ` passes through zero
    /// between samples.
    pub zero_crossings: Vec<f64>,
    pub closed_form: bool,
}

impl SymbolData {
    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    /// Trapezoid weights `h`, halved at the ends.
    fn weight(&self, j: usize) -> f64 {
        if j == 0 || j + 1 == self.xi.len() {
            0.5 * self.step
        } else {
            self.step
        }
    }

    /// `(2π)⁻¹ Σ_j w_j e^{-ixξ_j} f_j` at every `x`.
    pub fn inverse_transform(&self, samples: &[Complex64], x: &[f64]) -> Vec<Complex64> {
        assert_eq!(samples.len(), self.xi.len());
        x.par_iter()
            .map(|&x| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, (&xi, &f)) in self.xi.iter().zip(samples).enumerate() {
                    let (s, c) = (x * xi).sin_cos();
                    acc += Complex64::new(c, -s) * f * self.weight(j);
                }
                acc / (2.0 * PI)
            })
            .collect()
    }

    /// Whether every sample is real and `σ(ξ) = σ(-ξ)` exactly.
    pub fn is_real_even(&self) -> bool {
        let n = self.sigma.len();
        self.sigma.iter().all(|z| z.im == 0.0)
            && (0..n / 2).all(|j| self.sigma[j] == self.sigma[n - 1 - j])
    }
}

/// Symmetric grid `ξ_j = (j - (m-1)/2) h`, exactly antisymmetric in `j`.
fn xi_grid(xi_max: f64, m: usize) -> (Vec<f64>, f64) {
    let h = 2.0 * xi_max / (m - 1) as f64;
    let c = 0.5 * (m - 1) as f64;
    ((0..m).map(|j| (j as f64 - c) * h).collect(), h)
}

/// Samples `σ = 1 + k̂` for a kernel family using the closed-form transform.
pub fn build_symbol(spec: &KernelSpec, xi_max: f64, m: usize) -> Result<SymbolData> {
    build_symbol_from(
        |xi| Complex64::new(1.0 + hat_k(spec, xi), 0.0),
        xi_max,
        m,
        true,
    )
}

/// Samples an arbitrary symbol and unwraps its phase.
pub fn build_symbol_from<F>(
    sigma: F,
    xi_max: f64,
    m: usize,
    closed_form: bool,
) -> Result<SymbolData>
where
    F: Fn(f64) -> Complex64,
{
    if m < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 samples, got {m}"
        )));
    }
    if !(xi_max > 0.0 && xi_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "xi_max must be positive, got {xi_max}"
        )));
    }
    let (xi, step) = xi_grid(xi_max, m);
    let s: Vec<Complex64> = xi.iter().map(|&x| sigma(x)).collect();
    for &end in [s[0], s[m - 1]].iter() {
        if (end - 1.0).norm() >= 1e-14 {
            return Err(Error::InvalidArgument(format!(
                "symbol has not decayed to 1 at |xi| = {xi_max} (sigma - 1 = {:.3e}); \
                 increase xi_max",
                (end - 1.0).norm()
            )));
        }
    }
    if let Some(j) = s.iter().position(|z| !z.norm().is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "symbol is not finite at xi = {}",
            xi[j]
        )));
    }

    let (mut min_abs, mut argmin) = (f64::INFINITY, 0.0);
    for (&x, z) in xi.iter().zip(&s) {
        if z.norm() < min_abs {
            min_abs = z.norm();
            argmin = x;
        }
    }

    let mut phase = Vec::with_capacity(m);
    let mut crossings = Vec::new();
    phase.push(s[0].arg());
    for j in 1..m {
        let (a, b) = (s[j - 1], s[j]);
        let d = if a.norm() == 0.0 || b.norm() == 0.0 {
            crossings.push(if a.norm() == 0.0 { xi[j - 1] } else { xi[j] });
            0.0
        } else {
            (b / a).arg()
        };
        if d.abs() > MAX_PHASE_STEP {
            if segment_hits_origin(a, b) {
                let t = a.norm() / (a.norm() + b.norm());
                crossings.push(xi[j - 1] + t * step);
            } else {
                return Err(Error::CoarseSampling {
                    xi: xi[j],
                    jump: d.abs(),
                    m,
                });
            }
        }
        phase.push(phase[j - 1] + d);
    }
    crossings.dedup();
    let net_phase = phase[m - 1] - phase[0];
    let log_sigma = s
        .iter()
        .zip(&phase)
        .map(|(z, &p)| Complex64::new(z.norm().ln(), p))
        .collect();
    Ok(SymbolData {
        xi_max,
        step,
        xi,
        sigma: s,
        log_sigma,
        min_abs,
        argmin_xi: argmin,
        winding: (net_phase / (2.0 * PI)).round() as i64,
        net_phase,
        zero_crossings: crossings,
        closed_form,
    })
}

/// Whether the chord from `a` to `b` passes through the origin, up to
/// rounding in its own length.
fn segment_hits_origin(a: Complex64, b: Complex64) -> bool {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return false;
    }
    let t = (-(a.re * d.re + a.im * d.im) / len2).clamp(0.0, 1.0);
    let closest = a + d * t;
    closest.norm() <= 1e-12 * len2.sqrt()
}

/// Outcome of the index check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexCheck {
    pub pass: bool,
    pub min_abs: f64,
    pub argmin_xi: f64,
    pub winding: i64,
    pub zero_crossings: Vec<f64>,
    pub floor: f64,
}

impl std::fmt::Display for IndexCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "min|sigma| = {:.6e} at xi = {:.6}, winding = {}, floor = {:.1e}",
            self.min_abs, self.argmin_xi, self.winding, self.floor
        )?;
        if !self.zero_crossings.is_empty() {
            write!(f, ", sigma crosses zero at xi = [")?;
            for (i, z) in self.zero_crossings.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{z:.6}")?;
            }
            write!(f, "]")?;
        }
        Ok(())
    }
}

/// Passes iff `σ` stays above `floor` in modulus, never crosses zero, and
/// has winding number zero.
pub fn check_index(sd: &SymbolData, floor: f64) -> IndexCheck {
    let pass = sd.min_abs > floor && sd.winding == 0 && sd.zero_crossings.is_empty();
    IndexCheck {
        pass,
        min_abs: sd.min_abs,
        argmin_xi: sd.argmin_xi,
        winding: sd.winding,
        zero_crossings: sd.zero_crossings.clone(),
        floor,
    }
}

fn require_index(sd: &SymbolData) -> Result<()> {
    let c = check_index(sd, DEFAULT_INDEX_FLOOR);
    if c.pass {
        Ok(())
    } else {
        Err(Error::IndexFailure(c.to_string()))
    }
}

/// `s(x)` at each `x`, the inverse transform of `log σ`.
pub fn log_symbol_ift(sd: &SymbolData, x: &[f64]) -> Result<Vec<Complex64>> {
    require_index(sd)?;
    Ok(sd.inverse_transform(&sd.log_sigma, x))
}

/// The Kac–Ahieser constants `G = exp s(0)` and
/// `E = exp ∫₀^∞ x s(x) s(-x) dx`.
#[derive(Debug, Clone, Serialize)]
pub struct SzegoConstants {
    pub log_g: f64,
    pub g: f64,
    pub log_e: f64,
    pub e: f64,
    /// Nodes of the symmetric `x` grid carrying `s_samples`.
    #[serde(skip)]
    pub x: Vec<f64>,
    #[serde(skip)]
    pub s_samples: Vec<f64>,
}

pub fn szego_constants(sd: &SymbolData) -> Result<SzegoConstants> {
    szego_constants_with(sd, DEFAULT_X_MAX)
}

pub fn szego_constants_with(sd: &SymbolData, x_max: f64) -> Result<SzegoConstants> {
    require_index(sd)?;
    let grid = composite_on(0.0, x_max, 2.0, 20)?;
    let pos = grid.nodes();
    let neg: Vec<f64> = pos.iter().map(|x| -x).collect();
    let s_pos = sd.inverse_transform(&sd.log_sigma, pos);
    let s_neg = sd.inverse_transform(&sd.log_sigma, &neg);
    let s0 = sd.inverse_transform(&sd.log_sigma, &[0.0])[0];
    let log_e: f64 = pos
        .iter()
        .zip(grid.weights())
        .zip(s_pos.iter().zip(&s_neg))
        .map(|((&x, &w), (a, b))| w * x * (a * b).re)
        .sum();
    let mut x: Vec<f64> = neg.iter().rev().copied().collect();
    x.extend_from_slice(pos);
    let mut s_samples: Vec<f64> = s_neg.iter().rev().map(|z| z.re).collect();
    s_samples.extend(s_pos.iter().map(|z| z.re));
    Ok(SzegoConstants {
        log_g: s0.re,
        g: s0.re.exp(),
        log_e,
        e: log_e.exp(),
        x,
        s_samples,
    })
}

/// Parameters for [`e_operator_route`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ERouteParams {
    /// Half-line truncation `[0, L]`.
    pub l: f64,
    pub n_per_panel: usize,
    pub panel_width: f64,
    /// The determinant is taken on `[0, inner_fraction·L]`, away from the
    /// artificial corner at `L`.
    pub inner_fraction: f64,
    /// Samples of `σ⁻¹ - 1` used to build its kernel.
    pub xi_samples: usize,
}

impl Default for ERouteParams {
    fn default() -> Self {
        Self {
            l: 30.0,
            n_per_panel: 40,
            panel_width: 1.0,
            inner_fraction: 0.5,
            xi_samples: 1025,
        }
    }
}

/// `E` as `det(W(σ) W(σ⁻¹))` on the half-line.
///
/// Both Wiener–Hopf operators are discretized on `[0, L]`; their product is
/// compressed to `[0, inner_fraction·L]` before taking the determinant,
/// because the product of two truncated operators carries a second corner at
/// `L` that contributes another factor `E`.
pub fn e_operator_route(spec: &KernelSpec, params: ERouteParams) -> Result<f64> {
    if !(params.l > 0.0) || !(params.inner_fraction > 0.0 && params.inner_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "bad E-route parameters {params:?}"
        )));
    }
    let sd = build_symbol(spec, DEFAULT_XI_MAX, DEFAULT_SAMPLES)?;
    require_index(&sd)?;
    if spec.lambda == 0.0 {
        return Ok(1.0);
    }
    let coarse = build_symbol(spec, DEFAULT_XI_MAX, params.xi_samples)?;
    let inv_minus_one: Vec<Complex64> = coarse.sigma.iter().map(|z| z.inv() - 1.0).collect();

    let grid = composite_on(0.0, params.l, params.panel_width, params.n_per_panel)?;
    let a = kernel_matrix(
        &|x: f64, y: f64| spec.eval_limit(x - y),
        grid.nodes(),
        grid.weights(),
        grid.nodes(),
        grid.weights(),
        None,
        None,
    )?;
    let b = convolution_matrix(&grid, |d| {
        coarse.inverse_transform(&inv_minus_one, &[d])[0].re
    });
    let product = a.identity_plus().matmul(&b.identity_plus());
    let cut = params.inner_fraction * params.l;
    let idx: Vec<usize> = (0..grid.len()).filter(|&i| grid.nodes()[i] < cut).collect();
    Ok(Lu::new(product.select(&idx)).log_det().value())
}

/// `sqrt(w_i w_j) f(x_i - x_j)` for an even `f`, evaluating `f` once per
/// distinct distance `|x_i - x_j|`.
fn convolution_matrix<F: Fn(f64) -> f64 + Sync>(grid: &Grid, f: F) -> Matrix {
    let x = grid.nodes();
    let w = grid.weights();
    let n = x.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            pairs.push(((x[i] - x[j]).abs(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // distances equal to within rounding share one evaluation
    let mut reps: Vec<f64> = Vec::new();
    let mut which = Vec::with_capacity(pairs.len());
    for p in &pairs {
        match reps.last() {
            Some(&r) if p.0 - r <= 1e-13 * r.max(1.0) => {}
            _ => reps.push(p.0),
        }
        which.push(reps.len() - 1);
    }
    let vals: Vec<f64> = reps.par_iter().map(|&d| f(d)).collect();
    let mut m = Matrix::zeros(n, n);
    for (p, &k) in pairs.iter().zip(&which) {
        let (i, j) = (p.1, p.2);
        let v = vals[k] * (w[i] * w[j]).sqrt();
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    m
}

/// The coupling where `σ` first vanishes, located by bisection of the index
/// check (floor zero) on `[lo, hi]`; `hi` must pass and `lo` must fail.
pub fn critical_coupling(spec: &KernelSpec, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let passes = |lam: f64| -> Result<bool> {
        let sd = build_symbol(&spec.with_lambda(lam), DEFAULT_XI_MAX, DEFAULT_SAMPLES)?;
        Ok(check_index(&sd, 0.0).pass)
    };
    let (mut fail, mut ok) = (lo, hi);
    if !passes(ok)? || passes(fail)? {
        return Err(Error::InvalidArgument(format!(
            "index check must pass at {hi} and fail at {lo}"
        )));
    }
    while (ok - fail).abs() > tol {
        let mid = 0.5 * (ok + fail);
        if passes(mid)? {
            ok = mid;
        } else {
            fail = mid;
        }
    }
    Ok(0.5 * (ok + fail))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(lam: f64) -> SymbolData {
        build_symbol(&KernelSpec::toda(lam), DEFAULT_XI_MAX, DEFAULT_SAMPLES).unwrap()
    }

    #[test]
    fn hat_k_values() {
        let zero = KernelSpec::toda(0.0);
        assert_eq!(hat_k(&zero, 0.3), 0.0);
        assert_eq!(hat_k_numeric(&zero, 0.3).norm(), 0.0);
        let one = KernelSpec::toda(1.0);
        assert!((hat_k(&one, 0.0) - 2.0 * PI).abs() < 1e-15);
        assert!((hat_k(&one, 1.0) - 0.542_029_902_798_836_7).abs() < 1e-15);
        let n = hat_k_numeric(&one, 1.0);
        assert!((n.re - 0.542_029_902_798_836_7).abs() < 1e-12);
        assert!(n.im.abs() < 1e-14);
        let n0 = hat_k_numeric(&one, 0.0);
        assert!((n0.re - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn trivial_symbol() {
        let sd = sym(0.0);
        assert_eq!(sd.min_abs, 1.0);
        assert_eq!(sd.winding, 0);
        assert!(sd.sigma.iter().all(|z| *z == Complex64::new(1.0, 0.0)));
        assert!(check_index(&sd, DEFAULT_INDEX_FLOOR).pass);
        let s = log_symbol_ift(&sd, &[0.0, 1.0, -3.0]).unwrap();
        assert!(s.iter().all(|z| z.norm() == 0.0));
        let c = szego_constants(&sd).unwrap();
        assert_eq!((c.g, c.e), (1.0, 1.0));
    }

    #[test]
    fn positive_coupling_symbol() {
        let sd = sym(0.05);
        assert!((sd.min_abs - 1.0).abs() < 1e-15);
        assert!(sd.sigma.iter().all(|z| z.re >= 1.0));
        assert!(sd.is_real_even());
        assert!(check_index(&sd, 1e-6).pass);
        let mid = sd.len() / 2;
        assert_eq!(sd.xi[mid], 0.0);
        assert!((sd.sigma[mid].re - (1.0 + 2.0 * PI * 0.05)).abs() < 1e-15);
    }

    #[test]
    fn negative_coupling_fails_index() {
        let sd = sym(-0.5);
        assert!(sd.min_abs < 1.0);
        assert_eq!(sd.zero_crossings.len(), 2);
        let xc = sd.zero_crossings[1];
        // 1 - π sech(πξ) = 0  ⇒  ξ = acosh(π)/π
        assert!((xc - PI.acosh() / PI).abs() < 1e-4);
        assert!((sd.zero_crossings[0] + xc).abs() < 1e-12);
        let c = check_index(&sd, 1e-6);
        assert!(!c.pass);
        assert!(c.to_string().contains("crosses zero"));
        assert!(log_symbol_ift(&sd, &[0.0]).is_err());
        assert!(szego_constants(&sd).is_err());
    }

    #[test]
    fn coarse_sampling_is_rejected() {
        // winds once around the origin within a narrow bump
        let f = |xi: f64| {
            let t = 2.0 * PI / (1.0 + (-4.0 * xi).exp());
            Complex64::new(0.0, t).exp()
        };
        let coarse = build_symbol_from(f, 16.0, 9, false);
        assert!(matches!(coarse, Err(Error::CoarseSampling { .. })));
        let fine = build_symbol_from(f, 16.0, 4097, false).unwrap();
        assert_eq!(fine.winding, 1);
        assert!(!check_index(&fine, 1e-6).pass);
    }

    #[test]
    fn winding_stable_under_refinement() {
        let f = |xi: f64| {
            Complex64::new(1.0, 0.0)
                + 0.5 * Complex64::new(0.0, xi).exp() / (xi * xi + 1.0).powi(40)
        };
        let a = build_symbol_from(f, 16.0, 2049, false).unwrap();
        let b = build_symbol_from(f, 16.0, 8193, false).unwrap();
        assert_eq!(a.winding, b.winding);
        assert_eq!(a.winding, 0);
    }

    #[test]
    fn s_is_real_and_even() {
        let sd = sym(0.3);
        let xs = [0.25, 1.0, 3.5, 10.0, 40.0];
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        let p = log_symbol_ift(&sd, &xs).unwrap();
        let n = log_symbol_ift(&sd, &neg).unwrap();
        for (a, b) in p.iter().zip(&n) {
            assert!(a.im.abs() < 1e-12 && b.im.abs() < 1e-12);
            assert!((a.re - b.re).abs() < 1e-12);
        }
    }

    #[test]
    fn plancherel() {
        let sd = sym(0.3);
        let g = composite_on(-80.0, 80.0, 2.0, 20).unwrap();
        let s = log_symbol_ift(&sd, g.nodes()).unwrap();
        let x_energy: f64 = s
            .iter()
            .zip(g.weights())
            .map(|(z, w)| w * z.norm_sqr())
            .sum();
        let xi_energy: f64 = sd
            .log_sigma
            .iter()
            .enumerate()
            .map(|(j, z)| sd.weight(j) * z.norm_sqr())
            .sum::<f64>()
            / (2.0 * PI);
        assert!(
            (x_energy - xi_energy).abs() < 1e-8,
            "{x_energy} vs {xi_energy}"
        );
    }

    #[test]
    fn constants_match_high_precision() {
        // oracle: independent 30-digit quadrature of s(x) = π⁻¹∫₀^∞ cos(xξ) log σ dξ
        let cases = [
            (0.05, 0.045_687_553_845_295_1, 0.005_288_375_234_037_918),
            (0.01, 0.009_806_327_707_890_068, 0.000_261_322_207_477_081_4),
            (0.3, 0.203_882_851_440_959_2, 0.081_217_286_151_366_63),
        ];
        for (lam, log_g, log_e) in cases {
            let c = szego_constants(&sym(lam)).unwrap();
            assert!((c.log_g - log_g).abs() < 1e-14, "logG {lam}: {}", c.log_g);
            assert!((c.log_e - log_e).abs() < 1e-13, "logE {lam}: {}", c.log_e);
            assert_eq!(c.g, c.log_g.exp());
        }
    }

    #[test]
    fn small_coupling_expansion() {
        let lam = 0.01;
        let c = szego_constants(&sym(lam)).unwrap();
        assert!((c.log_g - lam).abs() < 3.0 * lam * lam);
        assert!(c.log_e.abs() < 4.0 * lam * lam);
        assert!(c.log_e >= 0.0);
        for lam in [0.05, 0.3, 1.0] {
            let c = szego_constants(&sym(lam)).unwrap();
            assert!(c.g > 1.0 && c.log_g > 0.0);
        }
    }

    #[test]
    fn e_operator_route_trivial() {
        let p = ERouteParams {
            l: 8.0,
            n_per_panel: 10,
            ..Default::default()
        };
        assert_eq!(e_operator_route(&KernelSpec::toda(0.0), p).unwrap(), 1.0);
        assert!(e_operator_route(&KernelSpec::toda(-0.5), p).is_err());
    }

    #[test]
    fn e_operator_route_small_coupling() {
        let p = ERouteParams {
            l: 24.0,
            n_per_panel: 20,
            ..Default::default()
        };
        let lam = 0.01;
        let e = e_operator_route(&KernelSpec::toda(lam), p).unwrap();
        let c = szego_constants(&sym(lam)).unwrap();
        assert!((e - 1.0).abs() < 4.0 * lam * lam);
        assert!((e - c.e).abs() / c.e < 1e-6, "{e} vs {}", c.e);
    }

    #[test]
    fn critical_coupling_is_minus_one_over_two_pi() {
        let c = critical_coupling(&KernelSpec::toda(1.0), -1.0, 0.0, 1e-12).unwrap();
        assert!((c + 1.0 / (2.0 * PI)).abs() < 1e-10, "{c}");
    }
}
