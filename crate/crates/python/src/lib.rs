//! Python bindings. Configurations, spaces, reports and surrogates cross the
//! boundary as JSON strings; points and values as lists of floats.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde_json::{json, Value};

use rss_core::ledger::EvaluationLedger;
use rss_core::models::{model_by_name, Model};
use rss_core::param_space::{ParameterSpace, SamplingScheme};
use rss_core::pce::{fit_pce, total_sobol as sobol, PceConfig, SparseSurrogate};
use rss_core::pipeline::{evaluate_points, run_adaptive, AdaptiveConfig};
use rss_core::screening::{run_screening, ScreeningConfig};
use rss_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_)
        | Error::UnknownModel(_)
        | Error::InvalidDistribution { .. }
        | Error::DimensionMismatch { .. }
        | Error::OutsideSupport { .. }
        | Error::Json(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse_json(what: &str, text: Option<&str>) -> PyResult<Value> {
    match text {
        None => Ok(Value::Null),
        Some(t) => serde_json::from_str(t).map_err(|e| PyValueError::new_err(format!("{what}: {e}"))),
    }
}

fn parse_config<T: serde::de::DeserializeOwned + Default>(what: &str, text: Option<&str>) -> PyResult<T> {
    match parse_json(what, text)? {
        Value::Null => Ok(T::default()),
        v => serde_path_to_error::deserialize(v)
            .map_err(|e| PyValueError::new_err(format!("{what}: field `{}`: {}", e.path(), e.inner()))),
    }
}

fn load_model(name: &str, options: Option<&str>) -> PyResult<Box<dyn Model>> {
    model_by_name(name, &parse_json("model options", options)?).map_err(to_py)
}

fn scheme(name: &str) -> PyResult<SamplingScheme> {
    match name {
        "lhs" | "latin_hypercube" => Ok(SamplingScheme::LatinHypercube),
        "mc" | "monte_carlo" => Ok(SamplingScheme::MonteCarlo),
        other => Err(PyValueError::new_err(format!("unknown sampling scheme `{other}`"))),
    }
}

/// Default parameter space of a named model, as JSON.
#[pyfunction]
#[pyo3(signature = (model, options=None))]
fn reference_space(model: &str, options: Option<&str>) -> PyResult<String> {
    Ok(load_model(model, options)?.reference_space().to_json())
}

/// Evaluate a named model at each point.
#[pyfunction]
#[pyo3(signature = (model, points, options=None))]
fn evaluate(py: Python<'_>, model: &str, points: Vec<Vec<f64>>, options: Option<&str>) -> PyResult<Vec<f64>> {
    let m = load_model(model, options)?;
    py.detach(|| evaluate_points(m.as_ref(), &points)).map_err(to_py)
}

/// Draw `count` points from a parameter space given as JSON.
#[pyfunction]
#[pyo3(signature = (space, count, scheme_name="lhs", seed=0))]
fn sample(space: &str, count: usize, scheme_name: &str, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let space = ParameterSpace::from_json(space).map_err(to_py)?;
    Ok(space.sample(count, scheme(scheme_name)?, seed).points)
}

/// Run DGSM screening on a named model; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (model, config=None, seed=0, options=None, space=None))]
fn screen(
    py: Python<'_>,
    model: &str,
    config: Option<&str>,
    seed: u64,
    options: Option<&str>,
    space: Option<&str>,
) -> PyResult<String> {
    let cfg: ScreeningConfig = parse_config("screening config", config)?;
    cfg.validate().map_err(to_py)?;
    let m = load_model(model, options)?;
    let space = match space {
        Some(s) => ParameterSpace::from_json(s).map_err(to_py)?,
        None => m.reference_space(),
    };
    py.detach(|| run_screening(m.as_ref(), &space, &cfg, &mut EvaluationLedger::new(), seed))
        .map(|r| r.to_json())
        .map_err(to_py)
}

/// Fit a sparse surrogate to training data; returns the surrogate as JSON.
#[pyfunction]
#[pyo3(signature = (space, points, values, p_max=None))]
fn fit(py: Python<'_>, space: &str, points: Vec<Vec<f64>>, values: Vec<f64>, p_max: Option<usize>) -> PyResult<String> {
    let space = ParameterSpace::from_json(space).map_err(to_py)?;
    let mut cfg = PceConfig::default();
    if let Some(p) = p_max {
        cfg.p_max = p;
    }
    cfg.validate().map_err(to_py)?;
    py.detach(|| fit_pce(&space, &points, &values, &cfg))
        .map(|s| s.to_json())
        .map_err(to_py)
}

/// Evaluate a surrogate (JSON) at points in the full input space.
#[pyfunction]
fn predict(surrogate: &str, points: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let s = SparseSurrogate::from_json(surrogate).map_err(to_py)?;
    s.predict_batch(&points).map_err(to_py)
}

/// Total Sobol' indices of the surrogate's own inputs.
#[pyfunction]
fn total_sobol(surrogate: &str) -> PyResult<Vec<f64>> {
    let s = SparseSurrogate::from_json(surrogate).map_err(to_py)?;
    sobol(&s).map_err(to_py)
}

/// Run the adaptive screening and surrogate pipeline; returns a JSON summary
/// with the outcome, passes, validation report and both surrogates.
#[pyfunction]
#[pyo3(signature = (model, config=None, seed=0, options=None))]
fn run(py: Python<'_>, model: &str, config: Option<&str>, seed: u64, options: Option<&str>) -> PyResult<String> {
    let cfg: AdaptiveConfig = parse_config("config", config)?;
    cfg.validate().map_err(to_py)?;
    let m = load_model(model, options)?;
    let space = m.reference_space();
    let r = py.detach(|| run_adaptive(m.as_ref(), &space, &cfg, seed)).map_err(to_py)?;
    let summary = json!({
        "outcome": r.outcome,
        "converged": r.converged(),
        "labels": space.labels(),
        "active": r.passes.last().map(|p| p.active.clone()),
        "passes": r.passes,
        "evaluations": r.ledger.len(),
        "screening": r.screening,
        "validation": r.validation,
        "fss": r.fss,
        "rss": r.rss,
    });
    serde_json::to_string(&summary).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn rss_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(reference_space, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(screen, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(total_sobol, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
