//! α-sweeps of `det(I + K_α)` against the predicted asymptote, the constants
//! record, the closed-form self-test, and report emission.

use std::f64::consts::{LN_2, PI};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Format, SweepConfig};
use crate::error::{Error, Result};
use crate::fredholm::{det_refined, fredholm_det, perturbed_inverse_det, DetResult, Refinement};
use crate::kernels::{Correction, Family, KernelSelector, KernelSpec};
use crate::quadrature::{composite_on, panel_edges};
use crate::symbol::{
    build_symbol, check_index, critical_coupling, e_operator_route, hat_k_closed, hat_k_numeric,
    szego_constants, ERouteParams, IndexCheck, DEFAULT_INDEX_FLOOR, DEFAULT_SAMPLES,
    DEFAULT_XI_MAX,
};
use crate::wienerhopf::{
    correction_det, integrate_logdet, logderiv_trace, reflection_check, CorrectionResult,
    FactorPair, HalfLineParams, TraceRoute,
};

/// Header of the CSV report.
pub const CSV_HEADER: &str =
    "alpha,det_direct,logG,logE,det_corr1,det_corr2,predicted,ratio,err_estimate";

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub alpha: f64,
    pub det_direct: f64,
    #[serde(rename = "logG")]
    pub log_g: f64,
    #[serde(rename = "logE")]
    pub log_e: f64,
    pub det_corr1: f64,
    pub det_corr2: f64,
    pub predicted: f64,
    pub ratio: f64,
    /// Relative error estimate of `ratio`: the refinement delta of
    /// `det_direct` plus, for both corrections, the refinement delta and the
    /// route disagreement.
    pub err_estimate: f64,
    #[serde(skip)]
    pub log_predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub family: Family,
    pub lambda: f64,
    pub index: IndexCheck,
    pub corr1: CorrectionResult,
    pub corr2: CorrectionResult,
    pub rows: Vec<ReportRow>,
}

fn spec_of(family: Family, lambda: f64) -> Result<KernelSpec> {
    KernelSpec::new(family, lambda)
}

/// The index check at the default resolution, as an error when it fails.
pub fn index_gate(spec: &KernelSpec) -> Result<IndexCheck> {
    let sd = build_symbol(spec, DEFAULT_XI_MAX, DEFAULT_SAMPLES)?;
    let c = check_index(&sd, DEFAULT_INDEX_FLOOR);
    if c.pass {
        Ok(c)
    } else {
        Err(Error::IndexFailure(c.to_string()))
    }
}

/// Where the index condition first fails between `lambda` and 0, if it
/// fails at `lambda`.
pub fn critical_lambda(spec: &KernelSpec) -> Option<f64> {
    if spec.lambda == 0.0 {
        return None;
    }
    critical_coupling(spec, spec.lambda, 0.0, 1e-12).ok()
}

fn half_line_params(cfg: &SweepConfig) -> HalfLineParams {
    let mut p = HalfLineParams {
        n_per_panel: cfg.panel_n,
        tol: cfg.tol.min(1e-10),
        ..HalfLineParams::default()
    };
    if let Some(l) = cfg.domain_l {
        p.min_reach = l;
    }
    p
}

fn relative_route_gap(c: &CorrectionResult) -> f64 {
    if c.det.value == 0.0 {
        return 0.0;
    }
    (c.det.value - c.ratio_route).abs() / c.det.value.abs() + c.det.relative_error()
}

/// `det(I + K_α)` on the decay-radius domain of `K_α`.
pub fn det_direct(
    spec: &KernelSpec,
    alpha: f64,
    n_per_panel: usize,
    tol: f64,
) -> Result<DetResult> {
    let r = spec.decay_radius(KernelSelector::Window { alpha }, tol)?;
    let edges = panel_edges(r.lo, r.hi, 1.0)?;
    let kernel = |x: f64, y: f64| spec.eval_window_kernel(alpha, x, y);
    det_refined(
        &kernel,
        &edges,
        None,
        tol,
        Refinement {
            start_order: n_per_panel,
            ..Refinement::default()
        },
    )
}

/// A report row; the prediction `G^{2α} E det₁ det₂` is formed as a
/// logarithm and only exponentiated for the `predicted` column, so `ratio`
/// stays finite when `predicted` itself overflows.
pub fn assemble_row(
    alpha: f64,
    direct: &DetResult,
    log_g: f64,
    log_e: f64,
    corr1: &DetResult,
    corr2: &DetResult,
    corr_err: f64,
) -> ReportRow {
    let corr_sign = corr1.sign * corr2.sign;
    let log_predicted = 2.0 * alpha * log_g + log_e + corr1.log_value + corr2.log_value;
    ReportRow {
        alpha,
        det_direct: direct.value,
        log_g,
        log_e,
        det_corr1: corr1.value,
        det_corr2: corr2.value,
        predicted: corr_sign * log_predicted.exp(),
        ratio: direct.sign * corr_sign * (direct.log_value - log_predicted).exp(),
        err_estimate: direct.relative_error() + corr_err,
        log_predicted,
    }
}

/// One row per α of `cfg`, ascending. Constants and corrections are
/// computed once.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let spec = spec_of(cfg.family, cfg.lambda)?;
    let index = index_gate(&spec)?;
    let sd = build_symbol(&spec, DEFAULT_XI_MAX, DEFAULT_SAMPLES)?;
    let consts = szego_constants(&sd)?;
    let hp = half_line_params(cfg);
    let corr1 = correction_det(&spec, Correction::K11, &hp)?;
    let corr2 = correction_det(&spec, Correction::K22, &hp)?;
    let corr_err = relative_route_gap(&corr1) + relative_route_gap(&corr2);

    let mut alphas = cfg.alphas();
    alphas.sort_by(f64::total_cmp);
    let dets: Vec<Result<DetResult>> = alphas
        .par_iter()
        .map(|&a| det_direct(&spec, a, cfg.panel_n, cfg.tol))
        .collect();
    let mut rows = Vec::with_capacity(alphas.len());
    for (&alpha, d) in alphas.iter().zip(dets) {
        let d = d?;
        if !d.converged {
            return Err(Error::NotConverged {
                alpha,
                delta: d.error_estimate,
            });
        }
        rows.push(assemble_row(
            alpha,
            &d,
            consts.log_g,
            consts.log_e,
            &corr1.det,
            &corr2.det,
            corr_err,
        ));
    }
    Ok(SweepReport {
        family: cfg.family,
        lambda: cfg.lambda,
        index,
        corr1,
        corr2,
        rows,
    })
}

/// Renders the rows; CSV values carry 17 significant digits, JSON uses the
/// shortest round-trip representation.
pub fn render_report(rows: &[ReportRow], format: Format) -> Result<String> {
    match format {
        Format::Csv => {
            let mut s = String::from(CSV_HEADER);
            s.push('\n');
            for r in rows {
                let vals = [
                    r.alpha,
                    r.det_direct,
                    r.log_g,
                    r.log_e,
                    r.det_corr1,
                    r.det_corr2,
                    r.predicted,
                    r.ratio,
                    r.err_estimate,
                ];
                for (i, v) in vals.iter().enumerate() {
                    if i > 0 {
                        s.push(',');
                    }
                    write!(s, "{v:.16e}").expect("write to String");
                }
                s.push('\n');
            }
            Ok(s)
        }
        Format::Json => {
            let mut s = serde_json::to_string_pretty(rows).map_err(|e| Error::Io(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
    }
}

/// Writes the rendered report to `path`, or standard output when `None`.
pub fn emit_report(rows: &[ReportRow], format: Format, path: Option<&Path>) -> Result<()> {
    let text = render_report(rows, format)?;
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Constants by both routes with their disagreements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsRecord {
    pub family: Family,
    pub lambda: f64,
    pub index: IndexCheck,
    #[serde(rename = "logG")]
    pub log_g: f64,
    /// `∫₀^∞ x s(x) s(-x) dx`.
    #[serde(rename = "logE_integral")]
    pub log_e_integral: f64,
    /// `log det(W(σ) W(σ⁻¹))`.
    #[serde(rename = "logE_operator")]
    pub log_e_operator: f64,
    /// `|E_integral − E_operator| / E_integral`.
    pub e_rel_diff: f64,
    pub det_corr1: f64,
    pub det_corr2: f64,
    /// `log det(I + K₁)` by linear solve and by coupling integration.
    pub log_det_corr1_solve: f64,
    pub log_det_corr1_integral: f64,
    pub log_det_corr2_solve: f64,
    pub log_det_corr2_integral: f64,
    pub corr1_route_diff: f64,
    pub corr2_route_diff: f64,
    /// `|det₁ − det₂| / |det₁|` on mirrored grids.
    pub reflection: f64,
}

/// Control knobs of [`constants`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsParams {
    pub e_route: ERouteParams,
    pub half_line: HalfLineParams,
    /// Tolerance of the coupling integration.
    pub integral_tol: f64,
}

impl Default for ConstantsParams {
    fn default() -> Self {
        Self {
            e_route: ERouteParams::default(),
            half_line: HalfLineParams::default(),
            integral_tol: 1e-7,
        }
    }
}

impl ConstantsParams {
    pub fn from_config(cfg: &SweepConfig) -> Self {
        let mut p = Self {
            half_line: half_line_params(cfg),
            ..Self::default()
        };
        if let Some(l) = cfg.domain_l {
            p.e_route.l = l;
        }
        p
    }
}

pub fn constants(family: Family, lambda: f64, params: &ConstantsParams) -> Result<ConstantsRecord> {
    let spec = spec_of(family, lambda)?;
    let index = index_gate(&spec)?;
    let sd = build_symbol(&spec, DEFAULT_XI_MAX, DEFAULT_SAMPLES)?;
    let sz = szego_constants(&sd)?;
    let e_op = e_operator_route(&spec, params.e_route)?;
    let hp = &params.half_line;
    let c1 = correction_det(&spec, Correction::K11, hp)?;
    let c2 = correction_det(&spec, Correction::K22, hp)?;
    let i1 = integrate_logdet(&spec, Correction::K11, 1.0, params.integral_tol, hp)?;
    let i2 = integrate_logdet(&spec, Correction::K22, 1.0, params.integral_tol, hp)?;
    Ok(ConstantsRecord {
        family,
        lambda,
        index,
        log_g: sz.log_g,
        log_e_integral: sz.log_e,
        log_e_operator: e_op.ln(),
        e_rel_diff: (sz.e - e_op).abs() / sz.e,
        det_corr1: c1.det.value,
        det_corr2: c2.det.value,
        log_det_corr1_solve: c1.det.log_value,
        log_det_corr1_integral: i1,
        log_det_corr2_solve: c2.det.log_value,
        log_det_corr2_integral: i2,
        corr1_route_diff: (c1.det.log_value - i1).abs(),
        corr2_route_diff: (c2.det.log_value - i2).abs(),
        reflection: reflection_check(&spec, hp)?,
    })
}

/// One closed-form comparison of the self-test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckOutcome {
    fn new(name: &'static str, expected: f64, actual: f64, tolerance: f64) -> Self {
        let pass = (expected - actual).abs() < tolerance;
        Self {
            name,
            expected,
            actual,
            tolerance,
            pass,
        }
    }

    /// A check whose `actual` is already an error measure against zero.
    fn bound(name: &'static str, err: f64, tolerance: f64) -> Self {
        Self::new(name, 0.0, err, tolerance)
    }
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<22} expected {:.12e} actual {:.12e} (tol {:.0e})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.expected,
            self.actual,
            self.tolerance
        )
    }
}

/// Deliberate perturbations of the self-test references.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Faults {
    /// Added to the closed form `2πλ sech(πξ)`.
    pub hat_k_offset: f64,
}

pub fn selftest() -> Result<Vec<CheckOutcome>> {
    selftest_with(Faults::default())
}

pub fn selftest_with(faults: Faults) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    let unit = KernelSpec::toda(1.0);

    let hat_err = (0..=100)
        .map(|j| -5.0 + 0.1 * j as f64)
        .map(|xi| {
            (hat_k_numeric(&unit, xi).re - (hat_k_closed(&unit, xi) + faults.hat_k_offset)).abs()
        })
        .fold(0.0, f64::max);
    out.push(CheckOutcome::bound("hat_k", hat_err, 1e-8));

    let sd = build_symbol(&unit, DEFAULT_XI_MAX, 1025)?;
    let mid = sd.len() / 2;
    out.push(CheckOutcome::new(
        "sigma(0)",
        1.0 + 2.0 * PI,
        sd.sigma[mid].re,
        1e-10,
    ));

    let fp = FactorPair;
    let mut nm_err: f64 = 0.0;
    for i in 1..=10 {
        for j in 1..=10 {
            let (u, v) = (0.6 * i as f64, 0.6 * j as f64);
            nm_err = nm_err.max((fp.compose_nm(u, v) - (1.0 / (0.5 * (u - v)).cosh())).abs());
        }
    }
    out.push(CheckOutcome::bound("nm_identity", nm_err, 1e-8));

    let tr = logderiv_trace(
        &unit,
        Correction::K11,
        0.0,
        &HalfLineParams::default(),
        TraceRoute::Direct,
    )?;
    out.push(CheckOutcome::new(
        "logderiv_trace(0)",
        -EULER_GAMMA - LN_2,
        tr,
        1e-7,
    ));

    let g = composite_on(0.0, 1.0, 1.0, 10)?;
    let d = fredholm_det(&|x: f64, y: f64| (1.0 + x) * (2.0 * y).cos(), &g, None)?;
    out.push(CheckOutcome::new(
        "rank_one_det",
        1.0 + 2f64.sin() + 0.25 * (2f64.cos() - 1.0),
        d.value,
        1e-12,
    ));

    let spec = KernelSpec::toda(0.05);
    let hp = HalfLineParams::default();
    out.push(CheckOutcome::bound(
        "reflection",
        reflection_check(&spec, &hp)?,
        1e-8,
    ));

    let pg = composite_on(-4.0, 4.0, 1.0, 16)?;
    let a = |x: f64, y: f64| 0.3 / (1.0 + (x - y).powi(2));
    let b = |x: f64, y: f64| 0.1 * (-(x * x + y * y)).exp();
    let p = perturbed_inverse_det(&a, &b, &pg, None, None)?;
    out.push(CheckOutcome::new(
        "solve_vs_ratio",
        p.ratio_route,
        p.det.value,
        1e-10,
    ));
    Ok(out)
}
