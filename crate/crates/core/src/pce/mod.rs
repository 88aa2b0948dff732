//! Sparse polynomial chaos expansions.

pub mod basis;
pub mod lars;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{HouseholderQr, Matrix};
use crate::param_space::ParameterSpace;

pub use basis::{basis_size, total_degree_indices, MultiIndexBasis, PolyFamily};
pub use lars::{hybrid_lar, LarFit};

const SATURATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PceConfig {
    /// Largest total degree tried by the degree sweep.
    pub p_max: usize,
}

impl Default for PceConfig {
    fn default() -> Self {
        Self { p_max: 6 }
    }
}

impl PceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_max < 1 {
            return Err(Error::Config("pce: p_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// How a reduced-space surrogate maps full parameter vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedMap {
    pub active: Vec<usize>,
    /// Full-length vector; entries at inactive positions are the frozen values.
    pub frozen: Vec<f64>,
    pub full_labels: Vec<String>,
}

impl ReducedMap {
    pub fn full_dimension(&self) -> usize {
        self.frozen.len()
    }

    pub fn project(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.full_dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.full_dimension(),
                got: theta.len(),
            });
        }
        Ok(self.active.iter().map(|&i| theta[i]).collect())
    }

    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full = self.frozen.clone();
        for (&i, &v) in self.active.iter().zip(reduced) {
            full[i] = v;
        }
        full
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateDiagnostics {
    #[serde(with = "crate::io::extended_f64")]
    pub loo: f64,
    pub term_count: usize,
    pub training_count: usize,
    pub degree: usize,
    /// LOO of the best support at each degree tried.
    #[serde(with = "crate::io::extended_f64_vec")]
    pub degree_loo: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSurrogate {
    /// Distributions of the surrogate's own coordinates.
    pub space: ParameterSpace,
    pub basis: MultiIndexBasis,
    pub active_terms: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub reduced_map: Option<ReducedMap>,
    pub diagnostics: SurrogateDiagnostics,
}

impl SparseSurrogate {
    /// Input dimension expected by [`SparseSurrogate::predict`].
    pub fn input_dimension(&self) -> usize {
        self.reduced_map
            .as_ref()
            .map_or(self.space.dimension(), |m| m.full_dimension())
    }

    pub fn input_labels(&self) -> Vec<String> {
        self.reduced_map
            .as_ref()
            .map_or_else(|| self.space.labels(), |m| m.full_labels.clone())
    }

    /// Prediction at a canonical point of the surrogate's own coordinates.
    pub fn predict_canonical(&self, xi: &[f64]) -> f64 {
        self.basis
            .eval_terms(xi, &self.active_terms)
            .iter()
            .zip(&self.coefficients)
            .map(|(p, c)| p * c)
            .sum()
    }

    /// Prediction at a full parameter vector. Reduced surrogates read only
    /// the active coordinates; the rest sit at their frozen values.
    pub fn predict(&self, theta: &[f64]) -> Result<f64> {
        let own = match &self.reduced_map {
            Some(m) => m.project(theta)?,
            None => theta.to_vec(),
        };
        let xi = self.space.to_canonical(&own)?;
        Ok(self.predict_canonical(&xi))
    }

    /// Predictions at many points, in order.
    pub fn predict_batch(&self, thetas: &[Vec<f64>]) -> Result<Vec<f64>> {
        thetas.par_iter().map(|t| self.predict(t)).collect()
    }

    /// Multi-index of the `k`-th selected term.
    pub fn term_index(&self, k: usize) -> &[usize] {
        &self.basis.indices[self.active_terms[k]]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("surrogate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Config(format!("surrogate: field `{}`: {}", e.path(), e.inner())))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Plain hat-matrix leave-one-out error of a least-squares fit.
pub fn loo_error(x_active: &Matrix, y: &[f64], coefficients: &[f64]) -> Result<f64> {
    let n = x_active.rows();
    if y.len() != n || coefficients.len() != x_active.cols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let h = HouseholderQr::new(x_active)?.hat_diagonal();
    if h.iter().any(|&hi| hi >= 1.0 - SATURATION_TOL) {
        return Err(Error::SaturatedFit);
    }
    let yhat = x_active.mul_vec(coefficients);
    let ybar = y.iter().sum::<f64>() / n as f64;
    let num: f64 = (0..n).map(|i| ((y[i] - yhat[i]) / (1.0 - h[i])).powi(2)).sum();
    let sst: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    Ok(lars::loo_ratio(num, sst))
}

/// Total Sobol' indices of the surrogate's own coordinates.
pub fn total_sobol(s: &SparseSurrogate) -> Result<Vec<f64>> {
    let d = s.basis.dimension();
    let mut partial = vec![0.0; d];
    let mut variance = 0.0;
    for (k, &c) in s.coefficients.iter().enumerate() {
        let alpha = s.term_index(k);
        if alpha.iter().all(|&a| a == 0) {
            continue;
        }
        let c2 = c * c;
        variance += c2;
        for (i, &a) in alpha.iter().enumerate() {
            if a != 0 {
                partial[i] += c2;
            }
        }
    }
    if variance <= 0.0 {
        return Err(Error::ConstantSurrogate);
    }
    Ok(partial.into_iter().map(|p| p / variance).collect())
}

/// Total Sobol' indices over the full parameter vector; frozen inputs get 0.
pub fn total_sobol_full(s: &SparseSurrogate) -> Result<Vec<f64>> {
    let t = total_sobol(s)?;
    Ok(match &s.reduced_map {
        Some(m) => {
            let mut full = vec![0.0; m.full_dimension()];
            for (&i, v) in m.active.iter().zip(t) {
                full[i] = v;
            }
            full
        }
        None => t,
    })
}

/// Output mean and variance implied by the coefficients.
pub fn moments(s: &SparseSurrogate) -> (f64, f64) {
    let mut mean = 0.0;
    let mut var = 0.0;
    for (k, &c) in s.coefficients.iter().enumerate() {
        if s.term_index(k).iter().all(|&a| a == 0) {
            mean += c;
        } else {
            var += c * c;
        }
    }
    (mean, var)
}

/// Fit one degree.
pub fn fit_degree(space: &ParameterSpace, xis: &[Vec<f64>], y: &[f64], p: usize) -> Result<(MultiIndexBasis, LarFit)> {
    let basis = MultiIndexBasis::for_space(space, p)?;
    let x = basis.design_matrix(xis)?;
    let fit = hybrid_lar(&x, y)?;
    Ok((basis, fit))
}

/// Sparse PCE over `space` from training points given in `space`'s own
/// coordinates, sweeping the total degree from 1 to `p_max`.
pub fn fit_pce(space: &ParameterSpace, thetas: &[Vec<f64>], y: &[f64], cfg: &PceConfig) -> Result<SparseSurrogate> {
    cfg.validate()?;
    if thetas.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: thetas.len(),
            got: y.len(),
        });
    }
    if thetas.len() < 2 {
        return Err(Error::Regression(format!("need at least 2 training points, got {}", thetas.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Regression("non-finite training output".into()));
    }
    let xis = thetas
        .iter()
        .map(|t| space.to_canonical(t))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(MultiIndexBasis, LarFit)> = None;
    let mut degree_loo = Vec::new();
    let mut warnings = Vec::new();
    for p in 1..=cfg.p_max {
        let (basis, fit) = fit_degree(space, &xis, y, p)?;
        degree_loo.push(fit.loo);
        warnings.extend(fit.warnings.iter().map(|w| format!("degree {p}: {w}")));
        if best.as_ref().map_or(true, |(_, b)| fit.loo < b.loo) {
            best = Some((basis, fit));
        }
    }
    let (basis, fit) = best.expect("at least one degree fitted");
    Ok(SparseSurrogate {
        space: space.clone(),
        diagnostics: SurrogateDiagnostics {
            loo: fit.loo,
            term_count: fit.support.len(),
            training_count: y.len(),
            degree: basis.max_total_degree,
            degree_loo,
            warnings,
        },
        basis,
        active_terms: fit.support,
        coefficients: fit.coefficients,
        reduced_map: None,
    })
}

/// Reduced-space surrogate: training points are full vectors projected onto
/// `active`; inactive inputs are recorded at `frozen`.
pub fn fit_reduced_pce(
    full_space: &ParameterSpace,
    active: &[usize],
    frozen: &[f64],
    thetas: &[Vec<f64>],
    y: &[f64],
    cfg: &PceConfig,
) -> Result<SparseSurrogate> {
    if frozen.len() != full_space.dimension() {
        return Err(Error::DimensionMismatch {
            expected: full_space.dimension(),
            got: frozen.len(),
        });
    }
    let map = ReducedMap {
        active: active.to_vec(),
        frozen: frozen.to_vec(),
        full_labels: full_space.labels(),
    };
    let sub = full_space.subspace(active)?;
    let projected = thetas.iter().map(|t| map.project(t)).collect::<Result<Vec<_>>>()?;
    let mut s = fit_pce(&sub, &projected, y, cfg)?;
    s.reduced_map = Some(map);
    Ok(s)
}
