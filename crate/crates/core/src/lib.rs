//! Parameter screening with derivative-based global sensitivity measures and
//! sparse polynomial chaos surrogates built in the reduced parameter space.

pub mod cli;
pub mod dgsm;
pub mod error;
pub mod io;
pub mod ledger;
pub mod linalg;
pub mod models;
pub mod param_space;
pub mod pce;
pub mod pipeline;
pub mod screening;

pub use error::{Error, Result};
