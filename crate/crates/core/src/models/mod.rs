//! Model abstraction and the built-in models.

mod borehole;
mod elliptic;
mod oracles;

pub use borehole::{borehole, borehole_space, borehole_space_variance_reading, Borehole, BOREHOLE_RADIUS_OF_INFLUENCE};
pub use elliptic::{
    elliptic_qoi, elliptic_solve, elliptic_space, solve_semilinear, EllipticConfig, EllipticField, EllipticModel,
};
pub use oracles::{analytic_oracles, BilinearOracle, LinearOracle, OracleFacts, QuadraticOracle};

use serde_json::Value;

use crate::error::{Error, Result};
use crate::param_space::ParameterSpace;

/// A scalar quantity of interest `G(theta)` over a reference parameter space.
///
/// Implementations must be deterministic and safe to call concurrently.
pub trait Model: Send + Sync {
    fn name(&self) -> &str;

    fn reference_space(&self) -> ParameterSpace;

    fn dimension(&self) -> usize {
        self.reference_space().dimension()
    }

    fn evaluate(&self, theta: &[f64]) -> Result<f64>;

    /// Evaluate at `base` and at each of `neighbors`, which are small
    /// perturbations of `base`. Solvers may override this to warm-start the
    /// neighbour evaluations from the base state.
    fn evaluate_stencil(&self, base: &[f64], neighbors: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
        let g0 = self.evaluate(base)?;
        let values = neighbors
            .iter()
            .enumerate()
            .map(|(i, p)| {
                self.evaluate(p).map_err(|e| Error::Stencil {
                    index: i,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((g0, values))
    }
}

/// Names accepted by [`model_by_name`].
pub const MODEL_NAMES: [&str; 5] = ["borehole", "elliptic", "oracle:linear", "oracle:quad", "oracle:bilinear"];

/// Construct a built-in model from its configuration name and options.
pub fn model_by_name(name: &str, options: &Value) -> Result<Box<dyn Model>> {
    let opts = if options.is_null() { Value::Object(Default::default()) } else { options.clone() };
    match name {
        "borehole" => {
            let cfg: borehole::BoreholeOptions = parse_options(name, opts)?;
            Ok(Box::new(Borehole::with_options(cfg)))
        }
        "elliptic" => {
            let cfg: EllipticConfig = parse_options(name, opts)?;
            cfg.validate()?;
            Ok(Box::new(EllipticModel::new(cfg)))
        }
        "oracle:linear" => {
            let cfg: oracles::LinearOptions = parse_options(name, opts)?;
            Ok(Box::new(LinearOracle::new(cfg.weights)?))
        }
        "oracle:quad" => {
            let _: oracles::NoOptions = parse_options(name, opts)?;
            Ok(Box::new(QuadraticOracle::new()))
        }
        "oracle:bilinear" => {
            let _: oracles::NoOptions = parse_options(name, opts)?;
            Ok(Box::new(BilinearOracle::new()))
        }
        other => Err(Error::UnknownModel(other.to_string())),
    }
}

fn parse_options<T: serde::de::DeserializeOwned>(name: &str, opts: Value) -> Result<T> {
    serde_path_to_error::deserialize(opts)
        .map_err(|e| Error::Config(format!("model `{name}` options: field `{}`: {}", e.path(), e.inner())))
}

/// A model restricted to a subset of its inputs, the others frozen.
pub struct FrozenModel<'a> {
    inner: &'a dyn Model,
    active: Vec<usize>,
    frozen: Vec<f64>,
    space: ParameterSpace,
    name: String,
}

impl<'a> FrozenModel<'a> {
    /// `frozen` is a full-length point; its entries at `active` are ignored.
    pub fn new(inner: &'a dyn Model, full_space: &ParameterSpace, active: Vec<usize>, frozen: Vec<f64>) -> Result<Self> {
        if frozen.len() != full_space.dimension() {
            return Err(Error::DimensionMismatch {
                expected: full_space.dimension(),
                got: frozen.len(),
            });
        }
        let space = full_space.subspace(&active)?;
        let name = format!("{}[{}]", inner.name(), active.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","));
        Ok(Self {
            inner,
            active,
            frozen,
            space,
            name,
        })
    }

    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full = self.frozen.clone();
        for (&i, &x) in self.active.iter().zip(reduced) {
            full[i] = x;
        }
        full
    }
}

impl Model for FrozenModel<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn reference_space(&self) -> ParameterSpace {
        self.space.clone()
    }

    fn evaluate(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.active.len() {
            return Err(Error::DimensionMismatch {
                expected: self.active.len(),
                got: theta.len(),
            });
        }
        self.inner.evaluate(&self.expand(theta))
    }
}
