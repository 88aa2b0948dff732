//! Analytic test models with closed-form DGSMs, variances and total Sobol'
//! indices, all on `U[-1, 1]` inputs.

use serde::Deserialize;

use super::Model;
use crate::error::{Error, Result};
use crate::param_space::{InputDistribution, ParameterSpace};

/// Closed-form reference quantities of an oracle model.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleFacts {
    pub mu: Vec<f64>,
    pub variance: f64,
    pub total_sobol: Vec<f64>,
}

fn unit_box(d: usize) -> ParameterSpace {
    ParameterSpace::new(
        (1..=d)
            .map(|i| InputDistribution::uniform(format!("x{i}"), -1.0, 1.0).expect("valid"))
            .collect(),
    )
    .expect("non-empty")
}

fn check_dim(theta: &[f64], d: usize) -> Result<()> {
    if theta.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: theta.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct LinearOptions {
    #[serde(default = "default_weights")]
    pub weights: Vec<f64>,
}

fn default_weights() -> Vec<f64> {
    vec![1.0; 3]
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct NoOptions {}

/// `G = sum_i w_i x_i`.
#[derive(Debug, Clone)]
pub struct LinearOracle {
    weights: Vec<f64>,
}

impl LinearOracle {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Config("linear oracle needs at least one weight".into()));
        }
        Ok(Self { weights })
    }

    pub fn facts(&self) -> OracleFacts {
        let mu: Vec<f64> = self.weights.iter().map(|w| w * w).collect();
        let total: f64 = mu.iter().sum();
        OracleFacts {
            variance: total / 3.0,
            total_sobol: mu.iter().map(|m| m / total).collect(),
            mu,
        }
    }
}

impl Model for LinearOracle {
    fn name(&self) -> &str {
        "oracle:linear"
    }

    fn reference_space(&self) -> ParameterSpace {
        unit_box(self.weights.len())
    }

    fn dimension(&self) -> usize {
        self.weights.len()
    }

    fn evaluate(&self, theta: &[f64]) -> Result<f64> {
        check_dim(theta, self.weights.len())?;
        Ok(self.weights.iter().zip(theta).map(|(w, x)| w * x).sum())
    }
}

/// `G = x1^2 + 3 x2`.
#[derive(Debug, Clone, Default)]
pub struct QuadraticOracle;

impl QuadraticOracle {
    pub fn new() -> Self {
        Self
    }

    pub fn facts(&self) -> OracleFacts {
        // Var(x1^2) = 1/5 - 1/9 = 4/45, Var(3 x2) = 3.
        let v1 = 4.0 / 45.0;
        let v2 = 3.0;
        OracleFacts {
            mu: vec![4.0 / 3.0, 9.0],
            variance: v1 + v2,
            total_sobol: vec![v1 / (v1 + v2), v2 / (v1 + v2)],
        }
    }
}

impl Model for QuadraticOracle {
    fn name(&self) -> &str {
        "oracle:quad"
    }

    fn reference_space(&self) -> ParameterSpace {
        unit_box(2)
    }

    fn dimension(&self) -> usize {
        2
    }

    fn evaluate(&self, theta: &[f64]) -> Result<f64> {
        check_dim(theta, 2)?;
        Ok(theta[0] * theta[0] + 3.0 * theta[1])
    }
}

/// `G = x1 + x1 x2`.
#[derive(Debug, Clone, Default)]
pub struct BilinearOracle;

impl BilinearOracle {
    pub fn new() -> Self {
        Self
    }

    pub fn facts(&self) -> OracleFacts {
        // Var(x1) = 1/3, Var(x1 x2) = 1/9; x1 enters both terms.
        OracleFacts {
            mu: vec![4.0 / 3.0, 1.0 / 3.0],
            variance: 4.0 / 9.0,
            total_sobol: vec![1.0, 0.25],
        }
    }
}

impl Model for BilinearOracle {
    fn name(&self) -> &str {
        "oracle:bilinear"
    }

    fn reference_space(&self) -> ParameterSpace {
        unit_box(2)
    }

    fn dimension(&self) -> usize {
        2
    }

    fn evaluate(&self, theta: &[f64]) -> Result<f64> {
        check_dim(theta, 2)?;
        Ok(theta[0] + theta[0] * theta[1])
    }
}

/// The oracle catalogue with each model's closed-form facts.
pub fn analytic_oracles() -> Vec<(Box<dyn Model>, OracleFacts)> {
    let linear = LinearOracle::new(vec![1.0, 0.0, 0.0]).expect("weights");
    let facts = linear.facts();
    vec![
        (Box::new(linear) as Box<dyn Model>, facts),
        (Box::new(QuadraticOracle), QuadraticOracle.facts()),
        (Box::new(BilinearOracle), BilinearOracle.facts()),
    ]
}
