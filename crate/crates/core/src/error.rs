use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution `{label}`: {reason}")]
    InvalidDistribution { label: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coordinate {index} ({label}) = {value} lies outside the support [{lower}, {upper}]")]
    OutsideSupport {
        index: usize,
        label: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("model domain error: {0}")]
    Domain(String),

    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("model evaluation failed at stencil coordinate {index}: {source}")]
    Stencil {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate: constant model (all DGSM estimates are zero)")]
    ConstantModel,

    #[error("empty sample set")]
    EmptySamples,

    #[error("LOO undefined: saturated fit")]
    SaturatedFit,

    #[error("constant surrogate")]
    ConstantSurrogate,

    #[error("degenerate prediction set: zero variance")]
    ZeroVariance,

    #[error("relative error undefined: all model values are zero")]
    ZeroReference,

    #[error("regression failed: {0}")]
    Regression(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
