//! Derivative-based global sensitivity measures.
//!
//! `mu_i = E[(dG/dtheta_i)^2]` is estimated by Monte Carlo over one-sided
//! finite-difference gradients, and turned into the normalised screening
//! metric `nu_i = C_i mu_i / sum_j C_j mu_j`, where `C_i` is the Poincaré
//! constant of input `i`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Model;
use crate::param_space::ParameterSpace;

/// Default relative finite-difference step.
pub const DEFAULT_REL_STEP: f64 = 1e-6;

/// Gradient of the model at one point, from `N_p + 1` evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientSample {
    pub theta: Vec<f64>,
    pub g: Vec<f64>,
    pub base_value: f64,
    /// Signed step per coordinate; negative entries are backward differences.
    pub steps: Vec<f64>,
    pub stencil_values: Vec<f64>,
}

impl GradientSample {
    /// The perturbed point used for coordinate `i`.
    pub fn stencil_point(&self, i: usize) -> Vec<f64> {
        let mut p = self.theta.clone();
        p[i] += self.steps[i];
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgsmEstimate {
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub sample_count: usize,
}

impl DgsmEstimate {
    pub fn from_samples(samples: &[GradientSample], space: &ParameterSpace) -> Result<Self> {
        let mu = estimate_mu(samples)?;
        let nu = screening_metric(&mu, space)?;
        Ok(Self {
            mu,
            nu,
            sample_count: samples.len(),
        })
    }
}

/// Step magnitudes `rel * scale_i`: `scale = b - a` for uniform inputs and
/// the standard deviation for normal inputs.
pub fn default_steps(space: &ParameterSpace, rel: f64) -> Vec<f64> {
    space.inputs().iter().map(|d| rel * d.scale()).collect()
}

/// One-sided finite-difference gradient.
///
/// Coordinates whose forward stencil would leave a bounded support switch to
/// a backward difference with the same magnitude.
pub fn fd_gradient(model: &dyn Model, space: &ParameterSpace, theta: &[f64], steps: &[f64]) -> Result<GradientSample> {
    let d = space.dimension();
    if theta.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: theta.len(),
        });
    }
    if steps.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: steps.len(),
        });
    }
    let signed: Vec<f64> = space
        .inputs()
        .iter()
        .zip(theta)
        .zip(steps)
        .map(|((dist, &x), &h)| match dist.upper_bound() {
            Some(upper) if x + h > upper => -h,
            _ => h,
        })
        .collect();
    let neighbors: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let mut p = theta.to_vec();
            p[i] += signed[i];
            p
        })
        .collect();
    let (g0, values) = model.evaluate_stencil(theta, &neighbors)?;
    // Divide by the realised step so the quotient matches the stencil exactly.
    let g = neighbors
        .iter()
        .zip(&values)
        .enumerate()
        .map(|(i, (p, gi))| (gi - g0) / (p[i] - theta[i]))
        .collect::<Vec<_>>();
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::Stencil {
            index: i,
            source: Box::new(Error::Domain("non-finite difference quotient".into())),
        });
    }
    Ok(GradientSample {
        theta: theta.to_vec(),
        g,
        base_value: g0,
        steps: signed,
        stencil_values: values,
    })
}

/// Gradients at every point; evaluated concurrently, returned in input order.
pub fn gradient_batch(
    model: &dyn Model,
    space: &ParameterSpace,
    points: &[Vec<f64>],
    steps: &[f64],
) -> Result<Vec<GradientSample>> {
    let results: Vec<Result<GradientSample>> = points
        .par_iter()
        .map(|p| fd_gradient(model, space, p, steps))
        .collect();
    results.into_iter().collect()
}

/// `mu_i = mean_k (g_i^k)^2`, accumulated in sample order.
pub fn estimate_mu(samples: &[GradientSample]) -> Result<Vec<f64>> {
    let first = samples.first().ok_or(Error::EmptySamples)?;
    let d = first.g.len();
    let mut mu = vec![0.0; d];
    for s in samples {
        if s.g.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: s.g.len(),
            });
        }
        for (m, g) in mu.iter_mut().zip(&s.g) {
            *m += g * g;
        }
    }
    let n = samples.len() as f64;
    mu.iter_mut().for_each(|m| *m /= n);
    Ok(mu)
}

/// Normalised Poincaré-weighted screening metric. Sums to one.
pub fn screening_metric(mu: &[f64], space: &ParameterSpace) -> Result<Vec<f64>> {
    if mu.len() != space.dimension() {
        return Err(Error::DimensionMismatch {
            expected: space.dimension(),
            got: mu.len(),
        });
    }
    if mu.iter().any(|m| *m < 0.0 || !m.is_finite()) {
        return Err(Error::Domain("DGSM estimates must be finite and non-negative".into()));
    }
    let weighted: Vec<f64> = mu.iter().zip(space.poincare_constants()).map(|(m, c)| c * m).collect();
    let total: f64 = weighted.iter().sum();
    if total <= 0.0 {
        return Err(Error::ConstantModel);
    }
    Ok(weighted.into_iter().map(|w| w / total).collect())
}

/// Unnormalised upper bound `C_i mu_i / V` on the total Sobol' index.
pub fn sobol_upper_bound(mu: &[f64], space: &ParameterSpace, variance: f64) -> Vec<f64> {
    mu.iter()
        .zip(space.poincare_constants())
        .map(|(m, c)| c * m / variance)
        .collect()
}
