//! Small dense linear algebra: row-major matrices and Householder QR.

use crate::error::{Error, Result};

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

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Sub-matrix made of the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut m = Self::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            for (k, &j) in cols.iter().enumerate() {
                m.set(i, k, self.get(i, j));
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Householder QR of a tall matrix, stored column-major.
#[derive(Debug, Clone)]
pub struct HouseholderQr {
    m: usize,
    n: usize,
    /// Column-major; below the diagonal hold the Householder vectors.
    a: Vec<f64>,
    beta: Vec<f64>,
    rdiag: Vec<f64>,
}

impl HouseholderQr {
    pub fn new(x: &Matrix) -> Result<Self> {
        let (m, n) = (x.rows(), x.cols());
        if m < n {
            return Err(Error::Regression(format!(
                "least squares needs at least as many rows ({m}) as columns ({n})"
            )));
        }
        let mut a = vec![0.0; m * n];
        for j in 0..n {
            for i in 0..m {
                a[j * m + i] = x.get(i, j);
            }
        }
        let mut beta = vec![0.0; n];
        let mut rdiag = vec![0.0; n];
        for k in 0..n {
            let col = &mut a[k * m..(k + 1) * m];
            let sigma = norm(&col[k..]);
            if sigma == 0.0 {
                rdiag[k] = 0.0;
                continue;
            }
            let alpha = if col[k] > 0.0 { -sigma } else { sigma };
            col[k] -= alpha;
            let vnorm2: f64 = col[k..].iter().map(|v| v * v).sum();
            beta[k] = 2.0 / vnorm2;
            rdiag[k] = alpha;
            let (head, tail) = a.split_at_mut((k + 1) * m);
            let v = &head[k * m + k..(k + 1) * m];
            for j in 0..n - k - 1 {
                let c = &mut tail[j * m + k..(j + 1) * m];
                let s = beta[k] * dot(v, c);
                for (ci, vi) in c.iter_mut().zip(v) {
                    *ci -= s * vi;
                }
            }
        }
        Ok(Self { m, n, a, beta, rdiag })
    }

    /// Numerical rank: diagonal entries of R above `rtol * max |R_jj|`.
    pub fn is_full_rank(&self, rtol: f64) -> bool {
        let max = self.rdiag.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        max > 0.0 && self.rdiag.iter().all(|d| d.abs() > rtol * max)
    }

    fn apply_qt(&self, y: &mut [f64]) {
        for k in 0..self.n {
            if self.beta[k] == 0.0 {
                continue;
            }
            let v = &self.a[k * self.m + k..(k + 1) * self.m];
            let s = self.beta[k] * dot(v, &y[k..]);
            for (yi, vi) in y[k..].iter_mut().zip(v) {
                *yi -= s * vi;
            }
        }
    }

    fn apply_q(&self, y: &mut [f64]) {
        for k in (0..self.n).rev() {
            if self.beta[k] == 0.0 {
                continue;
            }
            let v = &self.a[k * self.m + k..(k + 1) * self.m];
            let s = self.beta[k] * dot(v, &y[k..]);
            for (yi, vi) in y[k..].iter_mut().zip(v) {
                *yi -= s * vi;
            }
        }
    }

    /// Least-squares solution of `X c = y`.
    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                got: y.len(),
            });
        }
        if !self.is_full_rank(1e-12) {
            return Err(Error::Regression("rank-deficient design matrix".into()));
        }
        let mut qty = y.to_vec();
        self.apply_qt(&mut qty);
        let mut c = vec![0.0; self.n];
        for k in (0..self.n).rev() {
            let mut s = qty[k];
            for j in k + 1..self.n {
                s -= self.a[j * self.m + k] * c[j];
            }
            c[k] = s / self.rdiag[k];
        }
        Ok(c)
    }

    /// Diagonal of the hat matrix `X (X^T X)^-1 X^T = Q Q^T`.
    pub fn hat_diagonal(&self) -> Vec<f64> {
        let mut h = vec![0.0; self.m];
        let mut e = vec![0.0; self.m];
        for k in 0..self.n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[k] = 1.0;
            self.apply_q(&mut e);
            for (hi, qi) in h.iter_mut().zip(&e) {
                *hi += qi * qi;
            }
        }
        h
    }
}

/// Least-squares coefficients of `X c = y`.
pub fn lstsq(x: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    HouseholderQr::new(x)?.solve(y)
}
