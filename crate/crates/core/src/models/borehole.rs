//! Borehole discharge benchmark.

use std::f64::consts::PI;

use serde::Deserialize;

use super::Model;
use crate::error::{Error, Result};
use crate::param_space::{InputDistribution, ParameterSpace};

/// Radius of influence `r` (m), held fixed.
pub const BOREHOLE_RADIUS_OF_INFLUENCE: f64 = 3698.30;

/// Standard deviation of `r_w` in the classical borehole setup.
const R_W_STD: f64 = 0.016_181_2;

/// Water discharge `Q` (m^3/yr) through a borehole.
///
/// `theta = [r_w, L, T_u, H_u, T_l, H_l, K_w]`.
pub fn borehole(theta: &[f64]) -> Result<f64> {
    if theta.len() != 7 {
        return Err(Error::DimensionMismatch {
            expected: 7,
            got: theta.len(),
        });
    }
    let [r_w, l, t_u, h_u, t_l, h_l, k_w] = [theta[0], theta[1], theta[2], theta[3], theta[4], theta[5], theta[6]];
    if r_w <= 0.0 {
        return Err(Error::Domain(format!("borehole radius r_w = {r_w} must be positive")));
    }
    let log_ratio = (BOREHOLE_RADIUS_OF_INFLUENCE / r_w).ln();
    if log_ratio <= 0.0 {
        return Err(Error::Domain(format!("ln(r/r_w) = {log_ratio} must be positive")));
    }
    let denom = log_ratio * (1.0 + 2.0 * l * t_u / (log_ratio * r_w * r_w * k_w) + t_u / t_l);
    let q = 2.0 * PI * t_u * (h_u - h_l) / denom;
    if !q.is_finite() {
        return Err(Error::Domain(format!("non-finite discharge at {theta:?}")));
    }
    Ok(q)
}

fn uniform_inputs() -> Vec<InputDistribution> {
    [
        ("L", 1120.0, 1680.0),
        ("T_u", 63_070.0, 115_600.0),
        ("H_u", 990.0, 1110.0),
        ("T_l", 63.1, 116.0),
        ("H_l", 700.0, 820.0),
        ("K_w", 9855.0, 12_045.0),
    ]
    .into_iter()
    .map(|(l, a, b)| InputDistribution::uniform(l, a, b).expect("valid bounds"))
    .collect()
}

/// Reference inputs with `r_w ~ N(0.1, 0.0161812^2)`.
pub fn borehole_space() -> ParameterSpace {
    let mut inputs = vec![InputDistribution::normal_std("r_w", 0.1, R_W_STD).expect("valid")];
    inputs.extend(uniform_inputs());
    ParameterSpace::new(inputs).expect("non-empty")
}

/// Alternative reading with `0.016` taken as the variance of `r_w`. About a
/// fifth of the mass then sits at `r_w <= 0`, where the model is undefined.
pub fn borehole_space_variance_reading() -> ParameterSpace {
    let mut inputs = vec![InputDistribution::normal("r_w", 0.1, 0.016).expect("valid")];
    inputs.extend(uniform_inputs());
    ParameterSpace::new(inputs).expect("non-empty")
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum RadiusReading {
    #[default]
    Std,
    Variance,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoreholeOptions {
    /// How the `0.016` spread of `r_w` is read.
    #[serde(default)]
    pub r_w_spread: RadiusReading,
}

#[derive(Debug, Clone, Default)]
pub struct Borehole {
    reading: RadiusReading,
}

impl Borehole {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_options(opts: BoreholeOptions) -> Self {
        Self {
            reading: opts.r_w_spread,
        }
    }
}

impl Model for Borehole {
    fn name(&self) -> &str {
        "borehole"
    }

    fn reference_space(&self) -> ParameterSpace {
        match self.reading {
            RadiusReading::Std => borehole_space(),
            RadiusReading::Variance => borehole_space_variance_reading(),
        }
    }

    fn dimension(&self) -> usize {
        7
    }

    fn evaluate(&self, theta: &[f64]) -> Result<f64> {
        borehole(theta)
    }
}
