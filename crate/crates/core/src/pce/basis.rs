//! Orthonormal tensor-product polynomial bases on total-degree index sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::param_space::{DistributionKind, ParameterSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolyFamily {
    /// Orthonormal w.r.t. the density 1/2 on [-1, 1].
    Legendre,
    /// Normalized probabilists' Hermite, orthonormal w.r.t. N(0, 1).
    Hermite,
}

impl PolyFamily {
    pub fn for_space(space: &ParameterSpace) -> Vec<PolyFamily> {
        space
            .inputs()
            .iter()
            .map(|d| match d.kind {
                DistributionKind::Uniform { .. } => PolyFamily::Legendre,
                DistributionKind::Normal { .. } => PolyFamily::Hermite,
            })
            .collect()
    }

    /// `psi_0(x) .. psi_p(x)`.
    pub fn eval_all(self, x: f64, p: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(p + 1);
        out.push(1.0);
        if p == 0 {
            return out;
        }
        // Classical recurrences, normalized afterwards.
        let mut raw = vec![1.0, x];
        for k in 1..p {
            let kf = k as f64;
            let next = match self {
                PolyFamily::Legendre => ((2.0 * kf + 1.0) * x * raw[k] - kf * raw[k - 1]) / (kf + 1.0),
                PolyFamily::Hermite => x * raw[k] - kf * raw[k - 1],
            };
            raw.push(next);
        }
        let mut fact = 1.0;
        for (k, r) in raw.iter().enumerate().skip(1) {
            let scale = match self {
                PolyFamily::Legendre => (2.0 * k as f64 + 1.0).sqrt(),
                PolyFamily::Hermite => {
                    fact *= k as f64;
                    1.0 / fact.sqrt()
                }
            };
            out.push(r * scale);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiIndexBasis {
    pub families: Vec<PolyFamily>,
    pub max_total_degree: usize,
    pub indices: Vec<Vec<usize>>,
}

/// Total-degree multi-indices in graded order. Within one degree, earlier
/// coordinates carry the larger exponents first: `[2,0], [1,1], [0,2]`.
pub fn total_degree_indices(d: usize, p: usize) -> Vec<Vec<usize>> {
    fn fill(pos: usize, remaining: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos + 1 == cur.len() {
            cur[pos] = remaining;
            out.push(cur.clone());
            return;
        }
        for a in (0..=remaining).rev() {
            cur[pos] = a;
            fill(pos + 1, remaining - a, cur, out);
        }
        cur[pos] = 0;
    }
    let mut out = Vec::new();
    let mut cur = vec![0; d];
    for degree in 0..=p {
        fill(0, degree, &mut cur, &mut out);
    }
    out
}

/// `C(d + p, p)`.
pub fn basis_size(d: usize, p: usize) -> usize {
    let mut c: u128 = 1;
    for k in 1..=p as u128 {
        c = c * (d as u128 + k) / k;
    }
    c as usize
}

impl MultiIndexBasis {
    pub fn new(families: Vec<PolyFamily>, p: usize) -> Result<Self> {
        if families.is_empty() {
            return Err(Error::Config("polynomial basis needs at least one coordinate".into()));
        }
        let indices = total_degree_indices(families.len(), p);
        Ok(Self {
            families,
            max_total_degree: p,
            indices,
        })
    }

    pub fn for_space(space: &ParameterSpace, p: usize) -> Result<Self> {
        Self::new(PolyFamily::for_space(space), p)
    }

    pub fn dimension(&self) -> usize {
        self.families.len()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn tables(&self, xi: &[f64]) -> Vec<Vec<f64>> {
        self.families
            .iter()
            .zip(xi)
            .map(|(f, &x)| f.eval_all(x, self.max_total_degree))
            .collect()
    }

    /// All basis functions at one canonical point.
    pub fn eval(&self, xi: &[f64]) -> Vec<f64> {
        let t = self.tables(xi);
        self.indices
            .iter()
            .map(|a| a.iter().enumerate().map(|(i, &k)| t[i][k]).product())
            .collect()
    }

    /// Selected basis functions at one canonical point.
    pub fn eval_terms(&self, xi: &[f64], terms: &[usize]) -> Vec<f64> {
        let t = self.tables(xi);
        terms
            .iter()
            .map(|&k| self.indices[k].iter().enumerate().map(|(i, &e)| t[i][e]).product())
            .collect()
    }

    /// Design matrix with one row per canonical point.
    pub fn design_matrix(&self, xis: &[Vec<f64>]) -> Result<Matrix> {
        let mut m = Matrix::zeros(xis.len(), self.len());
        for (r, xi) in xis.iter().enumerate() {
            if xi.len() != self.dimension() {
                return Err(Error::DimensionMismatch {
                    expected: self.dimension(),
                    got: xi.len(),
                });
            }
            for (c, v) in self.eval(xi).into_iter().enumerate() {
                m.set(r, c, v);
            }
        }
        Ok(m)
    }
}
