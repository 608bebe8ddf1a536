//! Dense row-major matrices and LU factorization with partial pivoting.

use rayon::prelude::*;

/// Below this size the factorization runs on one thread.
const PAR_THRESHOLD: usize = 192;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn<F: Fn(usize, usize) -> f64>(rows: usize, cols: usize, f: F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// `I + self`.
    pub fn identity_plus(&self) -> Matrix {
        assert!(self.is_square());
        let mut m = self.clone();
        for i in 0..self.rows {
            m[(i, i)] += 1.0;
        }
        m
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.add(&other.scaled(-1.0))
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let (n, m) = (self.rows, other.cols);
        let mut out = Matrix::zeros(n, m);
        out.data
            .par_chunks_mut(m.max(1))
            .enumerate()
            .for_each(|(i, orow)| {
                let arow = &self.data[i * self.cols..(i + 1) * self.cols];
                for (k, &a) in arow.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    let brow = &other.data[k * m..(k + 1) * m];
                    for (o, &b) in orow.iter_mut().zip(brow) {
                        *o += a * b;
                    }
                }
            });
        out
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, v) in sums.iter_mut().zip(self.row(i)) {
                *s += v.abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Principal sub-matrix on the selected indices.
    pub fn select(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(idx.len(), idx.len(), |i, j| self[(idx[i], idx[j])])
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// `log|det|` and sign, accumulated pivot by pivot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub log_abs: f64,
    pub sign: f64,
}

impl LogDet {
    pub fn value(&self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.log_abs.exp()
        }
    }

    pub fn is_singular(&self) -> bool {
        self.sign == 0.0
    }
}

/// In-place LU factors `PA = LU` with unit-diagonal `L`.
#[derive(Debug, Clone)]
pub struct Lu {
    factors: Matrix,
    perm: Vec<usize>,
    swaps: usize,
    /// First column where the pivot was exactly zero.
    zero_pivot: Option<usize>,
}

impl Lu {
    pub fn new(mut a: Matrix) -> Lu {
        assert!(a.is_square(), "LU needs a square matrix");
        let n = a.rows;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        let mut zero_pivot = None;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a[(i, k)].abs()))
                .fold(
                    (k, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
            if pmax == 0.0 {
                zero_pivot.get_or_insert(k);
                continue;
            }
            if p != k {
                let (top, bottom) = a.data.split_at_mut(p * n);
                top[k * n..(k + 1) * n].swap_with_slice(&mut bottom[..n]);
                perm.swap(k, p);
                swaps += 1;
            }
            let (head, tail) = a.data.split_at_mut((k + 1) * n);
            let pivot_row = &head[k * n..];
            let piv = pivot_row[k];
            let update = |row: &mut [f64]| {
                let l = row[k] / piv;
                row[k] = l;
                if l != 0.0 {
                    for (r, &u) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                        *r -= l * u;
                    }
                }
            };
            if n - k > PAR_THRESHOLD {
                tail.par_chunks_mut(n).for_each(update);
            } else {
                tail.chunks_mut(n).for_each(update);
            }
        }
        Lu {
            factors: a,
            perm,
            swaps,
            zero_pivot,
        }
    }

    pub fn dim(&self) -> usize {
        self.factors.rows
    }

    pub fn zero_pivot(&self) -> Option<usize> {
        self.zero_pivot
    }

    pub fn is_singular(&self) -> bool {
        self.zero_pivot.is_some()
    }

    pub fn log_det(&self) -> LogDet {
        if self.zero_pivot.is_some() {
            return LogDet {
                log_abs: f64::NEG_INFINITY,
                sign: 0.0,
            };
        }
        let mut sign = if self.swaps.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        let mut log_abs = 0.0;
        for i in 0..self.dim() {
            let u = self.factors[(i, i)];
            if u < 0.0 {
                sign = -sign;
            }
            log_abs += u.abs().ln();
        }
        LogDet { log_abs, sign }
    }

    /// `max|u_ii| / min|u_ii|`, a cheap lower bound on the condition number.
    pub fn pivot_ratio(&self) -> f64 {
        let d = (0..self.dim()).map(|i| self.factors[(i, i)].abs());
        let (lo, hi) = d.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    /// Solves `A X = B` for every column of `B`. Panics if singular.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        assert!(!self.is_singular(), "solve with a singular LU");
        let n = self.dim();
        assert_eq!(b.rows, n);
        let m = b.cols;
        let mut x = Matrix::from_fn(n, m, |i, j| b[(self.perm[i], j)]);
        let f = &self.factors;
        // forward: L y = P b, row-oriented so updates stay contiguous
        for i in 0..n {
            let (done, rest) = x.data.split_at_mut(i * m);
            let xi = &mut rest[..m];
            for k in 0..i {
                let l = f[(i, k)];
                if l != 0.0 {
                    for (a, &b) in xi.iter_mut().zip(&done[k * m..(k + 1) * m]) {
                        *a -= l * b;
                    }
                }
            }
        }
        for i in (0..n).rev() {
            let (head, rest) = x.data.split_at_mut((i + 1) * m);
            let xi = &mut head[i * m..];
            for k in i + 1..n {
                let u = f[(i, k)];
                if u != 0.0 {
                    for (a, &b) in xi.iter_mut().zip(&rest[(k - i - 1) * m..(k - i) * m]) {
                        *a -= u * b;
                    }
                }
            }
            let d = f[(i, i)];
            xi.iter_mut().for_each(|a| *a /= d);
        }
        x
    }

    /// Solves `Aᵀ x = b` for a single vector.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let (f, perm) = (&self.factors, &self.perm);
        let n = f.rows();
        // Aᵀ = Uᵀ Lᵀ P, so solve Uᵀ z = b, Lᵀ w = z, then x = Pᵀ w.
        let mut z = b.to_vec();
        for i in 0..n {
            let s: f64 = (0..i).map(|k| f[(k, i)] * z[k]).sum();
            z[i] = (z[i] - s) / f[(i, i)];
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| f[(k, i)] * z[k]).sum();
            z[i] -= s;
        }
        let mut x = vec![0.0; n];
        for (i, &p) in perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }

    pub fn inverse(&self) -> Matrix {
        self.solve(&Matrix::identity(self.dim()))
    }
}

/// `log det(I + a)`.
pub fn log_det_identity_plus(a: &Matrix) -> LogDet {
    Lu::new(a.identity_plus()).log_det()
}
