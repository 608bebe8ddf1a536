//! Nyström discretization and Fredholm determinants.
//!
//! An integral operator with kernel `K(x, y)` on a quadrature grid becomes
//! the matrix `√w_i K(x_i, x_j) √w_j`; `det(I + K)` is approximated by the
//! determinant of `I` plus that matrix. For analytic kernels on
//! Gauss–Legendre panels the approximation converges exponentially in the
//! number of nodes per panel.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{LogDet, Lu, Matrix};
use crate::quadrature::{build_composite, Grid, MaskSelector, DEFAULT_PANEL_N};

/// Condition estimate above which `I + A` is flagged as ill-conditioned.
pub const ILL_CONDITIONED: f64 = 1e10;

/// Default number of order doublings in [`det_refined`].
pub const DEFAULT_MAX_DOUBLINGS: usize = 4;

/// Kernel matrix on a grid, symmetrically weighted.
#[derive(Debug, Clone)]
pub struct NystromMatrix<'g> {
    pub entries: Matrix,
    pub grid: &'g Grid,
    pub mask: Option<Vec<bool>>,
}

impl NystromMatrix<'_> {
    pub fn dim(&self) -> usize {
        self.entries.rows()
    }

    /// `log det(I + K)` on this grid.
    pub fn log_det(&self) -> LogDet {
        Lu::new(self.entries.identity_plus()).log_det()
    }
}

/// Assembles `√w_i K(x_i, x_j) √w_j`, skipping (and zeroing) masked nodes.
///
/// The scale is `sqrt(w_i w_j)`, formed as one product so that a symmetric
/// kernel gives a bit-exactly symmetric matrix.
pub fn nystrom_matrix<'g, K>(
    kernel: &K,
    grid: &'g Grid,
    mask: Option<&[bool]>,
) -> Result<NystromMatrix<'g>>
where
    K: Fn(f64, f64) -> f64 + Sync + ?Sized,
{
    if let Some(m) = mask {
        if m.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "mask has {} entries for a grid of {} nodes",
                m.len(),
                grid.len()
            )));
        }
    }
    let entries = kernel_matrix(
        kernel,
        grid.nodes(),
        grid.weights(),
        grid.nodes(),
        grid.weights(),
        mask,
        mask,
    )?;
    Ok(NystromMatrix {
        entries,
        grid,
        mask: mask.map(<[bool]>::to_vec),
    })
}

/// Rectangular Nyström block `sqrt(w_i v_j) K(x_i, y_j)` between two grids.
pub(crate) fn kernel_matrix<K>(
    kernel: &K,
    rows: &[f64],
    row_w: &[f64],
    cols: &[f64],
    col_w: &[f64],
    row_mask: Option<&[bool]>,
    col_mask: Option<&[bool]>,
) -> Result<Matrix>
where
    K: Fn(f64, f64) -> f64 + Sync + ?Sized,
{
    let n = rows.len();
    let m = cols.len();
    let mut data = vec![0.0; n * m];
    let bad = data
        .par_chunks_mut(m.max(1))
        .enumerate()
        .filter_map(|(i, row)| {
            if row_mask.is_some_and(|mk| !mk[i]) {
                return None;
            }
            for j in 0..m {
                if col_mask.is_some_and(|mk| !mk[j]) {
                    continue;
                }
                let v = kernel(rows[i], cols[j]);
                if !v.is_finite() {
                    return Some((i, j, v));
                }
                row[j] = v * (row_w[i] * col_w[j]).sqrt();
            }
            None
        })
        .min_by_key(|&(i, j, _)| (i, j));
    if let Some((i, j, value)) = bad {
        return Err(Error::NonFiniteKernel {
            i,
            j,
            x: rows[i],
            y: cols[j],
            value,
        });
    }
    Ok(Matrix::from_rows(n, m, data))
}

/// A determinant together with its refinement-based error estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetResult {
    pub value: f64,
    /// `log|det|`; `-inf` when singular.
    pub log_value: f64,
    pub sign: f64,
    /// `|det(n) - det(coarser)|` where the coarser grid has half the order
    /// per panel.
    pub error_estimate: f64,
    pub grid_size: usize,
    /// The factorization hit an exactly zero pivot; `value` is 0.
    pub singular: bool,
    pub converged: bool,
    /// `(order per panel, det)` for every grid visited, coarse to fine.
    pub levels: Vec<(usize, f64)>,
}

impl DetResult {
    fn from_log_det(ld: LogDet, grid_size: usize) -> Self {
        DetResult {
            value: ld.value(),
            log_value: ld.log_abs,
            sign: ld.sign,
            error_estimate: 0.0,
            grid_size,
            singular: ld.is_singular(),
            converged: true,
            levels: Vec::new(),
        }
    }

    /// The exact determinant of `I`.
    pub fn one() -> Self {
        Self::from_log_det(
            LogDet {
                log_abs: 0.0,
                sign: 1.0,
            },
            0,
        )
    }

    /// `error_estimate / |value|`, or the absolute estimate when the value
    /// vanishes.
    pub fn relative_error(&self) -> f64 {
        if self.value == 0.0 {
            self.error_estimate
        } else {
            self.error_estimate / self.value.abs()
        }
    }
}

fn coarse_order(grid: &Grid) -> usize {
    (grid.n_per_panel() / 2).max(1)
}

fn det_on_grid<K>(kernel: &K, grid: &Grid, mask: Option<MaskSelector>) -> Result<LogDet>
where
    K: Fn(f64, f64) -> f64 + Sync + ?Sized,
{
    let m = mask.map(|s| grid.mask(s));
    Ok(nystrom_matrix(kernel, grid, m.as_deref())?.log_det())
}

/// `det(I + K)` on `grid` restricted to the nodes picked by `mask`.
pub fn fredholm_det<K>(kernel: &K, grid: &Grid, mask: Option<MaskSelector>) -> Result<DetResult>
where
    K: Fn(f64, f64) -> f64 + Sync + ?Sized,
{
    let fine = det_on_grid(kernel, grid, mask)?;
    let mut out = DetResult::from_log_det(fine, grid.len());
    let coarse_n = coarse_order(grid);
    if coarse_n < grid.n_per_panel() {
        let coarse = det_on_grid(kernel, &grid.with_order(coarse_n)?, mask)?;
        out.error_estimate = (fine.value() - coarse.value()).abs();
        out.levels = vec![
            (coarse_n, coarse.value()),
            (grid.n_per_panel(), fine.value()),
        ];
    } else {
        out.levels = vec![(grid.n_per_panel(), fine.value())];
    }
    Ok(out)
}

/// Options for [`det_refined`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    pub start_order: usize,
    pub max_doublings: usize,
}

impl Default for Refinement {
    fn default() -> Self {
        Self {
            start_order: DEFAULT_PANEL_N,
            max_doublings: DEFAULT_MAX_DOUBLINGS,
        }
    }
}

/// Doubles the order per panel over fixed `panel_edges` until successive
/// determinants agree to `tol` (relative to `max(|det|, 1)`), or the
/// doubling cap is reached, in which case `converged` is false.
pub fn det_refined<K>(
    kernel: &K,
    panel_edges: &[f64],
    mask: Option<MaskSelector>,
    tol: f64,
    opts: Refinement,
) -> Result<DetResult>
where
    K: Fn(f64, f64) -> f64 + Sync + ?Sized,
{
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mut n = opts.start_order.max(1);
    let grid = build_composite(panel_edges, n)?;
    let mut prev = det_on_grid(kernel, &grid, mask)?;
    let mut levels = vec![(n, prev.value())];
    let mut last_diff = f64::INFINITY;
    let mut size = grid.len();
    for _ in 0..opts.max_doublings {
        n *= 2;
        let grid = build_composite(panel_edges, n)?;
        size = grid.len();
        let cur = det_on_grid(kernel, &grid, mask)?;
        levels.push((n, cur.value()));
        last_diff = (cur.value() - prev.value()).abs();
        prev = cur;
        if last_diff < tol * cur.value().abs().max(1.0) {
            let mut out = DetResult::from_log_det(cur, size);
            out.error_estimate = last_diff;
            out.levels = levels;
            return Ok(out);
        }
    }
    let mut out = DetResult::from_log_det(prev, size);
    out.error_estimate = if last_diff.is_finite() {
        last_diff
    } else {
        0.0
    };
    out.converged = false;
    out.levels = levels;
    Ok(out)
}

/// `det(I + (I + A)^{-1} B)` with its ratio-route cross-check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbedDet {
    pub det: DetResult,
    /// `det(I + A + B) / det(I + A)` on the same grid.
    pub ratio_route: f64,
    /// Estimate of the 1-norm condition number of `I + A`.
    pub condition: f64,
    pub ill_conditioned: bool,
}

/// Finite-dimensional core of [`perturbed_inverse_det`]: returns the
/// solve-route and ratio-route log-determinants and the condition estimate.
pub fn perturbed_inverse_det_matrices(a: &Matrix, b: &Matrix) -> Result<(LogDet, LogDet, f64)> {
    let ia = a.identity_plus();
    let lu = Lu::new(ia.clone());
    if let Some(pivot) = lu.zero_pivot() {
        return Err(Error::SingularWienerHopf { pivot });
    }
    let x = lu.solve(b);
    let solve_route = Lu::new(x.identity_plus()).log_det();
    let num = Lu::new(ia.add(b)).log_det();
    let den = lu.log_det();
    let ratio = LogDet {
        log_abs: num.log_abs - den.log_abs,
        sign: num.sign * den.sign,
    };
    Ok((solve_route, ratio, condition_estimate(&ia, &lu)))
}

/// `det(I + (I + A)^{-1} B)` for kernels `A` (masked by `a_mask`) and `B`
/// (masked by `b_mask`) on one grid.
pub fn perturbed_inverse_det<A, B>(
    a_kernel: &A,
    b_kernel: &B,
    grid: &Grid,
    a_mask: Option<MaskSelector>,
    b_mask: Option<MaskSelector>,
) -> Result<PerturbedDet>
where
    A: Fn(f64, f64) -> f64 + Sync + ?Sized,
    B: Fn(f64, f64) -> f64 + Sync + ?Sized,
{
    let on = |g: &Grid| -> Result<(LogDet, LogDet, f64)> {
        let am = a_mask.map(|s| g.mask(s));
        let bm = b_mask.map(|s| g.mask(s));
        let a = nystrom_matrix(a_kernel, g, am.as_deref())?;
        let b = nystrom_matrix(b_kernel, g, bm.as_deref())?;
        perturbed_inverse_det_matrices(&a.entries, &b.entries)
    };
    let (fine, ratio, condition) = on(grid)?;
    let mut det = DetResult::from_log_det(fine, grid.len());
    let coarse_n = coarse_order(grid);
    det.levels = vec![(grid.n_per_panel(), fine.value())];
    if coarse_n < grid.n_per_panel() {
        let (coarse, _, _) = on(&grid.with_order(coarse_n)?)?;
        det.error_estimate = (fine.value() - coarse.value()).abs();
        det.levels.insert(0, (coarse_n, coarse.value()));
    }
    Ok(PerturbedDet {
        det,
        ratio_route: ratio.value(),
        condition,
        ill_conditioned: condition > ILL_CONDITIONED,
    })
}

/// Hager's estimate of `‖A‖₁ ‖A⁻¹‖₁`.
pub fn condition_estimate(a: &Matrix, lu: &Lu) -> f64 {
    if lu.is_singular() {
        return f64::INFINITY;
    }
    let n = a.rows();
    if n == 0 {
        return 1.0;
    }
    let col = |v: Vec<f64>| Matrix::from_rows(n, 1, v);
    let mut x = vec![1.0 / n as f64; n];
    let mut est = 0.0;
    for _ in 0..5 {
        let y = lu.solve(&col(x.clone()));
        let y = y.as_slice();
        let norm: f64 = y.iter().map(|v| v.abs()).sum();
        if norm <= est {
            break;
        }
        est = norm;
        let xi: Vec<f64> = y
            .iter()
            .map(|&v| if v >= 0.0 { 1.0 } else { -1.0 })
            .collect();
        let z = lu.solve_transpose(&xi);
        let (j, zmax) = z
            .iter()
            .enumerate()
            .map(|(j, v)| (j, v.abs()))
            .fold((0, -1.0), |b, c| if c.1 > b.1 { c } else { b });
        let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
        if zmax <= ztx {
            break;
        }
        x = vec![0.0; n];
        x[j] = 1.0;
    }
    est * a.norm_one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::quadrature::{composite_on, gauss_legendre, panel_edges};
    use proptest::prelude::*;

    #[test]
    fn zero_kernel() {
        let g = composite_on(-3.0, 3.0, 1.0, 8).unwrap();
        let z = |_: f64, _: f64| 0.0;
        let m = nystrom_matrix(&z, &g, None).unwrap();
        assert_eq!(m.entries.max_abs(), 0.0);
        let d = fredholm_det(&z, &g, None).unwrap();
        assert_eq!(d.value, 1.0);
        assert_eq!(d.error_estimate, 0.0);
    }

    #[test]
    fn symmetric_kernel_gives_symmetric_matrix() {
        let s = KernelSpec::toda(0.37);
        let g = composite_on(-5.0, 7.0, 1.0, 12).unwrap();
        let k = |x: f64, y: f64| s.eval_window_kernel(3.0, x, y);
        assert!(nystrom_matrix(&k, &g, None).unwrap().entries.is_symmetric());
    }

    #[test]
    fn unit_weight_entry() {
        let g = gauss_legendre(1, -1.0, 1.0).unwrap();
        // single node at 0 with weight 2: entry = 2·sech(0)
        let s = KernelSpec::toda(1.0);
        let k = |x: f64, y: f64| s.eval_limit(x - y);
        let m = nystrom_matrix(&k, &g, None).unwrap();
        assert_eq!(m.entries[(0, 0)], 2.0);
        let g = gauss_legendre(1, -0.5, 0.5).unwrap();
        assert_eq!(nystrom_matrix(&k, &g, None).unwrap().entries[(0, 0)], 1.0);
    }

    #[test]
    fn non_finite_kernel_names_node_pair() {
        let g = composite_on(0.0, 2.0, 1.0, 3).unwrap();
        let k = |x: f64, y: f64| if x > 1.5 && y < 0.5 { f64::NAN } else { 1.0 };
        match nystrom_matrix(&k, &g, None) {
            Err(Error::NonFiniteKernel { i, j, .. }) => {
                assert!(g.nodes()[i] > 1.5 && g.nodes()[j] < 0.5);
                assert_eq!(j, 0);
            }
            other => panic!("expected NonFiniteKernel, got {other:?}"),
        }
    }

    #[test]
    fn masked_nodes_never_evaluated() {
        let g = composite_on(-2.0, 2.0, 1.0, 4).unwrap();
        let k = |x: f64, _: f64| if x < 0.0 { f64::NAN } else { 0.5 };
        let m = g.mask(MaskSelector::Plus);
        let nm = nystrom_matrix(&k, &g, Some(&m)).unwrap();
        for i in 0..g.len() {
            for j in 0..g.len() {
                if !(m[i] && m[j]) {
                    assert_eq!(nm.entries[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn rank_one_determinant() {
        let g = composite_on(0.0, 1.0, 1.0, 10).unwrap();
        let d = fredholm_det(&|_: f64, _: f64| 1.0, &g, None).unwrap();
        assert!((d.value - 2.0).abs() < 1e-13);
        let a = |x: f64| 1.0 + x;
        let b = |y: f64| (2.0 * y).cos();
        let d = fredholm_det(&|x: f64, y: f64| a(x) * b(y), &g, None).unwrap();
        // 1 + ∫₀¹ (1+x) cos 2x dx
        let exact = 1.0 + 2f64.sin() + 0.25 * (2f64.cos() - 1.0);
        assert!((d.value - exact).abs() < 1e-13, "{} vs {exact}", d.value);
    }

    #[test]
    fn first_order_trace() {
        let s = KernelSpec::toda(0.01);
        let g = composite_on(-8.0, 8.0, 1.0, 20).unwrap();
        let d = fredholm_det(&|x: f64, y: f64| s.eval_limit(x - y), &g, None).unwrap();
        assert!((d.log_value - 0.16).abs() < 5e-3);
    }

    #[test]
    fn refined_examples() {
        let edges = panel_edges(0.0, 1.0, 1.0).unwrap();
        let z = det_refined(
            &|_: f64, _: f64| 0.0,
            &edges,
            None,
            1e-12,
            Refinement::default(),
        )
        .unwrap();
        assert_eq!(z.value, 1.0);
        assert_eq!(z.error_estimate, 0.0);
        assert!(z.converged);
        assert_eq!(z.levels.len(), 2);
        let r = det_refined(
            &|_: f64, _: f64| 1.0,
            &edges,
            None,
            1e-10,
            Refinement::default(),
        )
        .unwrap();
        assert!((r.value - 2.0).abs() < 1e-10);
        assert!(r.converged);
    }

    #[test]
    fn refined_is_cauchy() {
        let s = KernelSpec::toda(0.05);
        let edges = panel_edges(-10.0, 10.0, 2.5).unwrap();
        let r = det_refined(
            &|x: f64, y: f64| s.eval_limit(x - y),
            &edges,
            None,
            1e-14,
            Refinement {
                start_order: 2,
                max_doublings: 3,
            },
        )
        .unwrap();
        let d: Vec<f64> = r
            .levels
            .windows(2)
            .map(|w| (w[1].1 - w[0].1).abs())
            .collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
    }

    #[test]
    fn refined_reports_nonconvergence() {
        let edges = [0.0, 1.0];
        let k = |x: f64, y: f64| 5.0 * ((40.0 * x).sin() * (37.0 * y).cos());
        let r = det_refined(
            &k,
            &edges,
            None,
            1e-14,
            Refinement {
                start_order: 1,
                max_doublings: 2,
            },
        )
        .unwrap();
        assert!(!r.converged);
        assert!(r.error_estimate > 0.0);
    }

    #[test]
    fn singular_is_data() {
        let g = gauss_legendre(1, -0.5, 0.5).unwrap();
        let d = fredholm_det(&|_: f64, _: f64| -1.0, &g, None).unwrap();
        assert!(d.singular);
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn masked_equals_submatrix() {
        let s = KernelSpec::toda(0.4);
        let g = composite_on(-4.0, 4.0, 1.0, 10).unwrap();
        let k = |x: f64, y: f64| s.eval_limit(x - y);
        let m = g.mask(MaskSelector::Plus);
        let masked = nystrom_matrix(&k, &g, Some(&m)).unwrap().log_det();
        let full = nystrom_matrix(&k, &g, None).unwrap().entries;
        let idx: Vec<usize> = (0..g.len()).filter(|&i| m[i]).collect();
        let sub = Lu::new(full.select(&idx).identity_plus()).log_det();
        assert!((masked.log_abs - sub.log_abs).abs() < 1e-14);
    }

    #[test]
    fn perturbed_trivial_cases() {
        let s = KernelSpec::toda(0.3);
        let g = composite_on(-3.0, 3.0, 1.0, 10).unwrap();
        let k = |x: f64, y: f64| s.eval_limit(x - y);
        let z = |_: f64, _: f64| 0.0;
        let p = perturbed_inverse_det(&k, &z, &g, None, None).unwrap();
        assert_eq!(p.det.value, 1.0);
        let p = perturbed_inverse_det(&z, &k, &g, None, None).unwrap();
        let d = fredholm_det(&k, &g, None).unwrap();
        assert!((p.det.value - d.value).abs() < 1e-13 * d.value);
        assert!(!p.ill_conditioned);
    }

    #[test]
    fn perturbed_singular_is_error() {
        let g = gauss_legendre(1, -0.5, 0.5).unwrap();
        let r = perturbed_inverse_det(
            &|_: f64, _: f64| -1.0,
            &|_: f64, _: f64| 1.0,
            &g,
            None,
            None,
        );
        assert!(matches!(r, Err(Error::SingularWienerHopf { .. })));
    }

    #[test]
    fn condition_estimate_close_to_exact() {
        let a = Matrix::from_fn(8, 8, |i, j| {
            1.0 / (i + j + 1) as f64 + if i == j { 0.1 } else { 0.0 }
        });
        let lu = Lu::new(a.clone());
        let exact = a.norm_one() * lu.inverse().norm_one();
        let est = condition_estimate(&a, &lu);
        assert!(est <= exact * (1.0 + 1e-12) && est >= 0.3 * exact);
    }

    #[test]
    fn transpose_solve() {
        let a = Matrix::from_fn(7, 7, |i, j| {
            ((3 * i + 5 * j) % 7) as f64 - 2.5 + if i == j { 4.0 } else { 0.0 }
        });
        let b: Vec<f64> = (0..7).map(|i| i as f64 - 3.0).collect();
        let x = Lu::new(a.clone()).solve_transpose(&b);
        let r = a.transpose().matmul(&Matrix::from_rows(7, 1, x));
        for (ri, bi) in r.as_slice().iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    fn small(n: usize, scale: f64) -> impl Strategy<Value = Matrix> {
        prop::collection::vec(-scale..scale, n * n).prop_map(move |v| Matrix::from_rows(n, n, v))
    }

    proptest! {
        #[test]
        fn solve_route_equals_ratio_route(a in small(6, 0.3), b in small(6, 1.0)) {
            let (s, r, _) = perturbed_inverse_det_matrices(&a, &b).unwrap();
            prop_assert!((s.value() - r.value()).abs() <= 1e-12 * r.value().abs().max(1.0));
        }

        #[test]
        fn multiplicative(a in small(5, 0.5), b in small(5, 0.5)) {
            let prod = a.identity_plus().matmul(&b.identity_plus());
            let lhs = Lu::new(prod).log_det().value();
            let rhs = Lu::new(a.identity_plus()).log_det().value()
                * Lu::new(b.identity_plus()).log_det().value();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }
    }
}
