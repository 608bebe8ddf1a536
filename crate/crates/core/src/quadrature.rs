//! Composite Gauss–Legendre grids.

use crate::error::{Error, Result};

/// Default Gauss–Legendre order per panel.
pub const DEFAULT_PANEL_N: usize = 20;

/// Quadrature nodes and weights on `[a, b]`, assembled from panels.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    edges: Vec<f64>,
    n_per_panel: usize,
}

impl Grid {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Panel edges, ascending; `edges[0] = a`, last = `b`.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn n_per_panel(&self) -> usize {
        self.n_per_panel
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.edges[0], *self.edges.last().unwrap())
    }

    pub fn panels(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.edges.windows(2).map(|w| (w[0], w[1]))
    }

    /// `√w_i`, the symmetric Nyström scaling.
    pub fn sqrt_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.sqrt()).collect()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// The same panels with a different order per panel.
    pub fn with_order(&self, n_per_panel: usize) -> Result<Grid> {
        build_composite(&self.edges, n_per_panel)
    }

    /// The grid reflected through the origin, node-for-node exact:
    /// `mirrored().nodes()[i] == -nodes()[len - 1 - i]`.
    pub fn mirrored(&self) -> Grid {
        Grid {
            nodes: self.nodes.iter().rev().map(|x| -x).collect(),
            weights: self.weights.iter().rev().copied().collect(),
            edges: self.edges.iter().rev().map(|x| -x).collect(),
            n_per_panel: self.n_per_panel,
        }
    }

    pub fn mask(&self, sel: MaskSelector) -> Vec<bool> {
        mask(self, sel)
    }
}

/// Gauss–Legendre rule with `n` nodes on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<Grid> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "quadrature order must be >= 1".into(),
        ));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need a finite interval with a < b, got [{a}, {b}]"
        )));
    }
    let (t, w) = reference_rule(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    Ok(Grid {
        nodes: t.iter().map(|&ti| mid + half * ti).collect(),
        weights: w.iter().map(|&wi| half * wi).collect(),
        edges: vec![a, b],
        n_per_panel: n,
    })
}

/// Nodes (ascending) and weights on `[-1, 1]`, by Newton iteration on the
/// three-term recurrence.
fn reference_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut t = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 * z.abs().max(1.0) {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        // i-th largest root goes to the top
        t[n - 1 - i] = z;
        t[i] = -z;
        w[n - 1 - i] = wi;
        w[i] = wi;
    }
    if n % 2 == 1 {
        t[n / 2] = 0.0;
    }
    (t, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Concatenated Gauss–Legendre panels over `panel_edges`.
pub fn build_composite(panel_edges: &[f64], n_per_panel: usize) -> Result<Grid> {
    if panel_edges.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two panel edges".into(),
        ));
    }
    if panel_edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument(
            "panel edges must be strictly increasing".into(),
        ));
    }
    if n_per_panel == 0 {
        return Err(Error::InvalidArgument(
            "quadrature order must be >= 1".into(),
        ));
    }
    let (t, w) = reference_rule(n_per_panel);
    let panels = panel_edges.len() - 1;
    let mut nodes = Vec::with_capacity(panels * n_per_panel);
    let mut weights = Vec::with_capacity(panels * n_per_panel);
    for e in panel_edges.windows(2) {
        let half = 0.5 * (e[1] - e[0]);
        let mid = 0.5 * (e[0] + e[1]);
        nodes.extend(t.iter().map(|&ti| mid + half * ti));
        weights.extend(w.iter().map(|&wi| half * wi));
    }
    Ok(Grid {
        nodes,
        weights,
        edges: panel_edges.to_vec(),
        n_per_panel,
    })
}

/// Panel edges covering `[a, b]` with panels no wider than `max_width`.
/// Zero is always an edge when `a < 0 < b`.
pub fn panel_edges(a: f64, b: f64, max_width: f64) -> Result<Vec<f64>> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need a finite interval with a < b, got [{a}, {b}]"
        )));
    }
    if !(max_width > 0.0) {
        return Err(Error::InvalidArgument(
            "panel width must be positive".into(),
        ));
    }
    fn split(lo: f64, hi: f64, h: f64, out: &mut Vec<f64>) {
        let k = ((hi - lo) / h).ceil().max(1.0) as usize;
        for i in 1..=k {
            out.push(if i == k {
                hi
            } else {
                lo + (hi - lo) * i as f64 / k as f64
            });
        }
    }
    let mut edges = vec![a];
    if a < 0.0 && 0.0 < b {
        split(a, 0.0, max_width, &mut edges);
        split(0.0, b, max_width, &mut edges);
    } else {
        split(a, b, max_width, &mut edges);
    }
    Ok(edges)
}

/// Composite grid on `[a, b]` with panel width at most `max_width`.
pub fn composite_on(a: f64, b: f64, max_width: f64, n_per_panel: usize) -> Result<Grid> {
    build_composite(&panel_edges(a, b, max_width)?, n_per_panel)
}

/// Node selector for [`mask`]. Intervals are open.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskSelector {
    /// `[0, ∞)`
    Plus,
    /// `(-∞, 0)`
    Minus,
    Interval(f64, f64),
    All,
}

impl MaskSelector {
    pub fn contains(&self, x: f64) -> bool {
        match *self {
            MaskSelector::Plus => crate::kernels::chi_plus(x),
            MaskSelector::Minus => crate::kernels::chi_minus(x),
            MaskSelector::Interval(lo, hi) => lo < x && x < hi,
            MaskSelector::All => true,
        }
    }
}

pub fn mask(grid: &Grid, sel: MaskSelector) -> Vec<bool> {
    grid.nodes.iter().map(|&x| sel.contains(x)).collect()
}
