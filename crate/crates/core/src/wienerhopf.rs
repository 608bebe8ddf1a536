//! Correction determinants `det(I + K₁)` and `det(I + K₂)`.
//!
//! `K₁ = (I + χ⁺Kχ⁺)⁻¹ K11` and `K₂ = (I + χ⁻Kχ⁻)⁻¹ K22`. Two routes:
//!
//! * direct: a linear solve against the half-line Wiener–Hopf operator,
//!   [`correction_det`];
//! * coupling integration: with the kernels scaled by `c`,
//!   `d/dc log det(I + (I + cχ⁺Kχ⁺)⁻¹ c K11)` is the trace of
//!   `(I + cK₋)⁻¹K₋ − (I + cχ⁺Kχ⁺)⁻¹χ⁺Kχ⁺`, integrated from `c = 0`
//!   ([`integrate_logdet`]). Each term alone has a divergent trace; only the
//!   difference is formed, on one shared grid.
//!
//! For the Toda family `K₋ = λ M N` with explicit factors `M`, `N` through
//! the half-line, and `N M` is the Wiener–Hopf kernel `sech((u-v)/2)`. The
//! factorized route evaluates the first resolvent as `λ M (I + cλ N M)⁻¹ N`.

use std::f64::consts::SQRT_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fredholm::{
    condition_estimate, kernel_matrix, nystrom_matrix, perturbed_inverse_det, DetResult,
    ILL_CONDITIONED,
};
use crate::kernels::{Correction, Family, HalfSide, KernelSelector, KernelSpec};
use crate::linalg::{Lu, Matrix};
use crate::quadrature::{composite_on, Grid, MaskSelector, DEFAULT_PANEL_N};
use crate::symbol::{
    build_symbol, check_index, DEFAULT_INDEX_FLOOR, DEFAULT_SAMPLES, DEFAULT_XI_MAX,
};

/// Discretization controls shared by the correction computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalfLineParams {
    /// Tail tolerance handed to the decay radius of `K11`/`K22`.
    pub tol: f64,
    pub n_per_panel: usize,
    pub panel_width: f64,
    /// Added beyond the decay radius on both sides.
    pub margin: f64,
    /// The `u` grid of the factorized route is `[0, L⁺ + u_extra]`.
    pub u_extra: f64,
    /// Lower bound on the length of the exponential-tail side.
    pub min_reach: f64,
}

impl Default for HalfLineParams {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            n_per_panel: DEFAULT_PANEL_N,
            panel_width: 1.0,
            margin: 1.0,
            u_extra: 4.0,
            min_reach: 8.0,
        }
    }
}

impl HalfLineParams {
    pub fn with_order(self, n_per_panel: usize) -> Self {
        Self {
            n_per_panel,
            ..self
        }
    }

    /// Grid for `K11` (the mirror image serves `K22`).
    pub fn k11_grid(&self, spec: &KernelSpec) -> Result<Grid> {
        let r = spec
            .with_lambda(spec.lambda.abs().max(1e-3))
            .decay_radius(KernelSelector::Correction(Correction::K11), self.tol)?;
        let lo = r.lo.min(-1.0) - self.margin;
        let hi = r.hi.max(self.min_reach) + self.margin;
        composite_on(lo, hi, self.panel_width, self.n_per_panel)
    }

    pub fn grid_for(&self, spec: &KernelSpec, which: Correction) -> Result<Grid> {
        let g = self.k11_grid(spec)?;
        Ok(match which {
            Correction::K11 => g,
            Correction::K22 => g.mirrored(),
        })
    }
}

/// The side whose limit operator `K_∓` enters a correction.
fn side_of(which: Correction) -> HalfSide {
    match which {
        Correction::K11 => HalfSide::Minus,
        Correction::K22 => HalfSide::Plus,
    }
}

fn compressed_mask(which: Correction) -> MaskSelector {
    match which {
        Correction::K11 => MaskSelector::Plus,
        Correction::K22 => MaskSelector::Minus,
    }
}

/// Nyström matrix of `χ⁺Kχ⁺` (or `χ⁻Kχ⁻`); `I + matrix` discretizes the
/// Wiener–Hopf operator `W⁺` (or `W⁻`).
#[derive(Debug, Clone)]
pub struct HalfLineOp {
    pub grid: Grid,
    pub matrix: Matrix,
}

impl HalfLineOp {
    pub fn new(spec: &KernelSpec, which: Correction, grid: Grid) -> Result<Self> {
        let mask = grid.mask(compressed_mask(which));
        let matrix =
            nystrom_matrix(&|x: f64, y: f64| spec.eval_limit(x - y), &grid, Some(&mask))?.entries;
        Ok(Self { grid, matrix })
    }
}

fn require_index(spec: &KernelSpec) -> Result<()> {
    let sd = build_symbol(spec, DEFAULT_XI_MAX, DEFAULT_SAMPLES)?;
    let c = check_index(&sd, DEFAULT_INDEX_FLOOR);
    if c.pass {
        Ok(())
    } else {
        Err(Error::IndexFailure(c.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectionResult {
    pub det: DetResult,
    /// `det(I + A + B) / det(I + A)` on the same grid.
    pub ratio_route: f64,
    pub condition: f64,
    pub ill_conditioned: bool,
    /// `I + K_∓` is (numerically) singular, so the correction vanishes.
    pub singular_limit: bool,
}

/// `det(I + K₁)` or `det(I + K₂)` by a linear solve on the truncated line;
/// the error estimate is the change from half the order per panel.
pub fn correction_det(
    spec: &KernelSpec,
    which: Correction,
    params: &HalfLineParams,
) -> Result<CorrectionResult> {
    require_index(spec)?;
    if spec.family == Family::Window || spec.lambda == 0.0 {
        return Ok(CorrectionResult {
            det: DetResult::one(),
            ratio_route: 1.0,
            condition: 1.0,
            ill_conditioned: false,
            singular_limit: false,
        });
    }
    let grid = params.grid_for(spec, which)?;
    let side = side_of(which);
    let a = |x: f64, y: f64| spec.eval_compressed_limit(side, x, y);
    let b = |x: f64, y: f64| spec.eval_correction_kernel(which, x, y);
    let p = perturbed_inverse_det(&a, &b, &grid, None, None)?;
    let mut det = p.det;
    let half = grid.n_per_panel() / 2;
    if half >= 1 {
        let coarse = perturbed_inverse_det(&a, &b, &grid.with_order(half)?, None, None)?;
        det.error_estimate = (det.value - coarse.det.value).abs();
        det.levels = vec![(half, coarse.det.value), (grid.n_per_panel(), det.value)];
    }
    let singular_limit = det.singular || det.value.abs() < 1e-12;
    Ok(CorrectionResult {
        det,
        ratio_route: p.ratio_route,
        condition: p.condition,
        ill_conditioned: p.ill_conditioned,
        singular_limit,
    })
}

/// `|det(I + K₁) − det(I + K₂)| / |det(I + K₁)|` on exactly mirrored grids.
pub fn reflection_check(spec: &KernelSpec, params: &HalfLineParams) -> Result<f64> {
    let d1 = correction_det(spec, Correction::K11, params)?.det.value;
    let d2 = correction_det(spec, Correction::K22, params)?.det.value;
    if d1 == d2 {
        return Ok(0.0);
    }
    Ok((d1 - d2).abs() / d1.abs())
}

/// The factors `M(x, u)` and `N(v, y)` with `K₋|_{λ=1} = M N` through the
/// half-line `u > 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct FactorPair;

impl FactorPair {
    /// `√2 e^{-x/2} e^{-e^{u-x}} e^{u/2}`.
    #[inline]
    pub fn m(&self, x: f64, u: f64) -> f64 {
        let t = u - x;
        SQRT_2 * (0.5 * t - t.exp()).exp()
    }

    /// `√2 e^{-y/2} e^{-e^{v-y}} e^{v/2}`.
    #[inline]
    pub fn n(&self, v: f64, y: f64) -> f64 {
        self.m(y, v)
    }

    /// `∫ N(u, x) M(x, v) dx` over the line, by quadrature.
    pub fn compose_nm(&self, u: f64, v: f64) -> f64 {
        let lo = u.min(v) - 6.0;
        let hi = u.max(v) + 48.0;
        let g = composite_on(lo, hi, 1.0, 24).expect("valid interval");
        g.integrate(|x| self.n(u, x) * self.m(x, v))
    }

    /// `∫₀^∞ M(x, u) N(u, y) du`, by quadrature on `[0, max(x, y) + 6]`.
    pub fn compose_mn(&self, x: f64, y: f64) -> f64 {
        let hi = x.max(y).max(0.0) + 6.0;
        let g = composite_on(0.0, hi, 1.0, 24).expect("valid interval");
        g.integrate(|u| self.m(x, u) * self.n(u, y))
    }
}

/// How the `K₋` resolvent term of the trace formula is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceRoute {
    Direct,
    Factorized,
}

/// Matrices of the trace formula on one grid, reusable across couplings.
#[derive(Debug, Clone)]
pub struct TraceProblem {
    spec: KernelSpec,
    pub grid: Grid,
    /// `K₋` (or `K₊`).
    limit: Matrix,
    /// `χ⁺Kχ⁺` (or `χ⁻Kχ⁻`).
    compressed: Matrix,
    /// `M` (x by u) and `N` (u by x) at unit coupling.
    factors: Option<(Matrix, Matrix)>,
}

impl TraceProblem {
    pub fn new(
        spec: &KernelSpec,
        which: Correction,
        params: &HalfLineParams,
        route: TraceRoute,
    ) -> Result<Self> {
        let grid = params.grid_for(spec, which)?;
        let side = side_of(which);
        let limit = nystrom_matrix(
            &|x: f64, y: f64| spec.eval_half_limit(side, x, y),
            &grid,
            None,
        )?
        .entries;
        let compressed = HalfLineOp::new(spec, which, grid.clone())?.matrix;
        let factors = match (route, spec.family) {
            (TraceRoute::Factorized, Family::Toda) => {
                let (lo, hi) = grid.interval();
                let reach = match which {
                    Correction::K11 => hi,
                    Correction::K22 => -lo,
                };
                let ug = composite_on(
                    0.0,
                    reach + params.u_extra,
                    params.panel_width,
                    params.n_per_panel,
                )?;
                let fp = FactorPair;
                // K22 uses the reflected factors M(-x, u), N(u, -y).
                let refl = if which == Correction::K22 { -1.0 } else { 1.0 };
                let m = kernel_matrix(
                    &|x: f64, u: f64| fp.m(refl * x, u),
                    grid.nodes(),
                    grid.weights(),
                    ug.nodes(),
                    ug.weights(),
                    None,
                    None,
                )?;
                let n = kernel_matrix(
                    &|u: f64, y: f64| fp.n(u, refl * y),
                    ug.nodes(),
                    ug.weights(),
                    grid.nodes(),
                    grid.weights(),
                    None,
                    None,
                )?;
                Some((m, n))
            }
            _ => None,
        };
        Ok(Self {
            spec: *spec,
            grid,
            limit,
            compressed,
            factors,
        })
    }

    /// The factorized `λ M N` matrix, for comparison with the pointwise `K₋`.
    pub fn factorized_limit(&self) -> Option<Matrix> {
        self.factors
            .as_ref()
            .map(|(m, n)| m.matmul(n).scaled(self.spec.lambda))
    }

    pub fn limit_matrix(&self) -> &Matrix {
        &self.limit
    }

    /// Trace of the resolvent difference at `coupling`, and the larger of
    /// the two condition estimates.
    pub fn eval(&self, coupling: f64) -> Result<(f64, f64)> {
        let (t2, c2) = resolvent_diag(&self.compressed, coupling, coupling)?;
        let (t1, c1) = match &self.factors {
            None => resolvent_diag(&self.limit, coupling, coupling)?,
            Some((m, n)) => {
                let lam = self.spec.lambda;
                let nm = n.matmul(m);
                let sys = nm.scaled(coupling * lam).identity_plus();
                let lu = Lu::new(sys.clone());
                if lu.is_singular() {
                    return Err(Error::SingularResolvent { coupling });
                }
                let y = lu.solve(n);
                let d: Vec<f64> = (0..m.rows())
                    .map(|i| {
                        lam * m
                            .row(i)
                            .iter()
                            .enumerate()
                            .map(|(k, &v)| v * y[(k, i)])
                            .sum::<f64>()
                    })
                    .collect();
                (d, condition_estimate(&sys, &lu))
            }
        };
        let tr = t1.iter().zip(&t2).map(|(a, b)| a - b).sum();
        Ok((tr, c1.max(c2)))
    }
}

/// Diagonal of `(I + cA)⁻¹ A` and the condition estimate of `I + cA`.
fn resolvent_diag(a: &Matrix, c: f64, coupling: f64) -> Result<(Vec<f64>, f64)> {
    let sys = a.scaled(c).identity_plus();
    let lu = Lu::new(sys.clone());
    if lu.is_singular() {
        return Err(Error::SingularResolvent { coupling });
    }
    let x = lu.solve(a);
    Ok((
        (0..a.rows()).map(|i| x[(i, i)]).collect(),
        condition_estimate(&sys, &lu),
    ))
}

/// `d/dc log det(I + K_{1|2})` at `coupling` (kernels scaled by `coupling`).
pub fn logderiv_trace(
    spec: &KernelSpec,
    which: Correction,
    coupling: f64,
    params: &HalfLineParams,
    route: TraceRoute,
) -> Result<f64> {
    let (v, cond) = TraceProblem::new(spec, which, params, route)?.eval(coupling)?;
    if cond > ILL_CONDITIONED {
        return Err(Error::SingularResolvent { coupling });
    }
    Ok(v)
}

/// `log det(I + K_{1|2})` for the kernels scaled by `target`, by adaptive
/// Simpson integration of [`logderiv_trace`] from zero coupling (where the
/// log-determinant vanishes).
pub fn integrate_logdet(
    spec: &KernelSpec,
    which: Correction,
    target: f64,
    tol: f64,
    params: &HalfLineParams,
) -> Result<f64> {
    if target == 0.0 {
        return Ok(0.0);
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    require_index(&spec.with_lambda(spec.lambda * target))?;
    let prob = TraceProblem::new(spec, which, params, TraceRoute::Direct)?;
    let f = |c: f64| -> Result<f64> {
        let (v, cond) = prob.eval(c).map_err(|_| Error::SingularPath {
            target,
            near: c,
            condition: f64::INFINITY,
        })?;
        if cond > ILL_CONDITIONED {
            return Err(Error::SingularPath {
                target,
                near: c,
                condition: cond,
            });
        }
        Ok(v)
    };
    let (a, b) = (0.0, target);
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a)?, f(m)?, f(b)?);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&f, a, b, fa, fm, fb, whole, 0.25 * tol, 24)
}

#[allow(clippy::too_many_arguments)]
fn simpson<F: Fn(f64) -> Result<f64>>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm)?, f(rm)?);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    fn quick() -> HalfLineParams {
        HalfLineParams {
            tol: 1e-10,
            n_per_panel: 16,
            ..Default::default()
        }
    }

    #[test]
    fn factor_values() {
        let f = FactorPair;
        assert!((f.m(0.0, 0.0) - 0.520_260_095_022_889).abs() < 1e-15);
        for u in [0.1, 1.0, 3.0, 7.5] {
            assert!((f.compose_nm(u, u) - 1.0).abs() < 1e-12);
        }
        assert!((f.compose_nm(1.0, 2.0) - 0.886_818_883_970_073_9).abs() < 1e-12);
    }

    #[test]
    fn factorization_reproduces_k_minus() {
        let f = FactorPair;
        let s = KernelSpec::toda(1.0);
        for &(x, y) in &[
            (0.0, 0.0),
            (-1.0, 2.0),
            (3.0, 1.5),
            (-2.5, -0.5),
            (6.0, 6.0),
        ] {
            let want = s.eval_half_limit(HalfSide::Minus, x, y);
            assert!((f.compose_mn(x, y) - want).abs() < 1e-12, "({x}, {y})");
        }
    }

    #[test]
    fn window_family_is_trivial() {
        let w = KernelSpec::window(0.3);
        let p = quick();
        assert_eq!(
            correction_det(&w, Correction::K11, &p).unwrap().det.value,
            1.0
        );
        assert_eq!(
            correction_det(&w, Correction::K22, &p).unwrap().det.value,
            1.0
        );
        assert_eq!(reflection_check(&w, &p).unwrap(), 0.0);
        for c in [0.0, 0.4, 1.0] {
            assert_eq!(
                logderiv_trace(&w, Correction::K11, c, &p, TraceRoute::Direct).unwrap(),
                0.0
            );
        }
        assert_eq!(
            integrate_logdet(&w, Correction::K11, 1.0, 1e-6, &p).unwrap(),
            0.0
        );
    }

    #[test]
    fn zero_coupling_is_trivial() {
        let t = KernelSpec::toda(0.0);
        let p = quick();
        assert_eq!(
            correction_det(&t, Correction::K11, &p).unwrap().det.value,
            1.0
        );
        assert_eq!(reflection_check(&t, &p).unwrap(), 0.0);
        assert_eq!(
            integrate_logdet(&KernelSpec::toda(1.0), Correction::K11, 0.0, 1e-6, &p).unwrap(),
            0.0
        );
    }

    #[test]
    fn closed_form_trace_at_zero_coupling() {
        let t = KernelSpec::toda(1.0);
        let p = HalfLineParams::default();
        let v = logderiv_trace(&t, Correction::K11, 0.0, &p, TraceRoute::Direct).unwrap();
        let want = -EULER_GAMMA - std::f64::consts::LN_2;
        assert!((v - want).abs() < 1e-9, "{v} vs {want}");
        let w = logderiv_trace(&t, Correction::K22, 0.0, &p, TraceRoute::Direct).unwrap();
        assert!((w - want).abs() < 1e-9);
    }

    #[test]
    fn trace_routes_agree() {
        let t = KernelSpec::toda(1.0);
        let p = quick();
        for which in [Correction::K11, Correction::K22] {
            let d = logderiv_trace(&t, which, 0.3, &p, TraceRoute::Direct).unwrap();
            let f = logderiv_trace(&t, which, 0.3, &p, TraceRoute::Factorized).unwrap();
            assert!((d - f).abs() < 1e-8, "{which:?}: {d} vs {f}");
        }
    }

    #[test]
    fn trace_is_stable_in_domain_length() {
        let t = KernelSpec::toda(0.5);
        let p = quick();
        let q = HalfLineParams {
            margin: p.margin + 4.0,
            ..p
        };
        let a = logderiv_trace(&t, Correction::K11, 0.7, &p, TraceRoute::Direct).unwrap();
        let b = logderiv_trace(&t, Correction::K11, 0.7, &q, TraceRoute::Direct).unwrap();
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        // each resolvent trace alone grows with the domain
        let pa = TraceProblem::new(&t, Correction::K11, &p, TraceRoute::Direct).unwrap();
        let pb = TraceProblem::new(&t, Correction::K11, &q, TraceRoute::Direct).unwrap();
        let ta = resolvent_diag(&pa.limit, 0.7, 0.7)
            .unwrap()
            .0
            .iter()
            .sum::<f64>();
        let tb = resolvent_diag(&pb.limit, 0.7, 0.7)
            .unwrap()
            .0
            .iter()
            .sum::<f64>();
        assert!(tb - ta > 0.5);
    }

    #[test]
    fn small_target_first_order() {
        let t = KernelSpec::toda(1.0);
        let p = quick();
        let lam0 = 0.01;
        let v = integrate_logdet(&t, Correction::K11, lam0, 1e-9, &p).unwrap();
        let first = lam0 * (-EULER_GAMMA - std::f64::consts::LN_2);
        assert!((v - first).abs() < 5.0 * lam0 * lam0, "{v} vs {first}");
    }

    #[test]
    fn routes_agree_and_reflect() {
        let t = KernelSpec::toda(0.5);
        let p = quick();
        let c = correction_det(&t, Correction::K11, &p).unwrap();
        assert!(c.det.value > 0.0);
        assert!((c.det.value - c.ratio_route).abs() < 1e-10 * c.det.value);
        let i = integrate_logdet(&t, Correction::K11, 1.0, 1e-6, &p).unwrap();
        assert!(
            (c.det.log_value - i).abs() < 1e-6,
            "{} vs {i}",
            c.det.log_value
        );
        assert!(reflection_check(&t, &p).unwrap() < 1e-8);
    }

    #[test]
    fn refuses_failed_index() {
        let t = KernelSpec::toda(-0.5);
        assert!(matches!(
            correction_det(&t, Correction::K11, &quick()),
            Err(Error::IndexFailure(_))
        ));
        assert!(matches!(
            integrate_logdet(
                &KernelSpec::toda(-0.1),
                Correction::K11,
                2.0,
                1e-6,
                &quick()
            ),
            Err(Error::IndexFailure(_))
        ));
    }

    #[test]
    fn factorized_matrix_matches_pointwise() {
        let t = KernelSpec::toda(1.0);
        let prob =
            TraceProblem::new(&t, Correction::K11, &quick(), TraceRoute::Factorized).unwrap();
        let diff = prob
            .factorized_limit()
            .unwrap()
            .sub(prob.limit_matrix())
            .max_abs();
        assert!(diff < 1e-10, "{diff}");
    }
}
