//! Adaptive construction of full- and reduced-space surrogates.
//!
//! 1. Evaluate a validation suite.
//! 2. Draw the first screening batch and fit a full-space surrogate (FSS) to
//!    its base points.
//! 3. Accept the FSS if its error on the validation suite is below `fss_tol`.
//! 4. Otherwise finish the screening, and if the fraction of active inputs is
//!    at most `alpha_max` fit a reduced-space surrogate (RSS).
//! 5. If too many inputs are active, halve `tau` and screen again, up to
//!    `max_passes` times.

pub mod artifacts;
pub mod distribution;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::{EvaluationLedger, EvaluationTag};
use crate::models::{FrozenModel, Model};
use crate::param_space::{ParameterSpace, SamplingScheme};
use crate::pce::{fit_pce, fit_reduced_pce, PceConfig, SparseSurrogate};
use crate::screening::{Screening, ScreeningConfig, ScreeningReport};

pub use distribution::{histogram, kde, l2_error, output_distribution, propagate, Histogram, PdfCurve};

/// Where the reduced-space surrogate gets its training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RssTraining {
    /// Screening base points (and the validation suite unless held out),
    /// projected onto the active inputs.
    #[default]
    Ledger,
    /// A fresh Latin hypercube in the active inputs with the others frozen.
    Fresh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Validation error below which the full-space surrogate is accepted.
    /// The surrogate tested against it never includes the validation suite.
    pub fss_tol: f64,
    /// Largest fraction of active inputs for which a reduced surrogate is built.
    pub alpha_max: f64,
    pub validation_count: usize,
    pub max_passes: usize,
    /// Keep the validation suite out of every training set.
    pub strict_holdout: bool,
    pub rss_training: RssTraining,
    /// Design size when `rss_training` is `fresh`.
    pub rss_fresh_count: usize,
    /// Surrogate samples behind each density curve.
    pub pdf_samples: usize,
    pub histogram_bins: usize,
    /// Spacing of training counts in the LOO convergence table; 0 disables it.
    pub convergence_step: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fss_tol: 1e-3,
            alpha_max: 0.6,
            validation_count: 50,
            max_passes: 3,
            strict_holdout: false,
            rss_training: RssTraining::Ledger,
            rss_fresh_count: 100,
            pdf_samples: 100_000,
            histogram_bins: 30,
            convergence_step: 10,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(format!("pipeline: {m}")));
        if !(self.fss_tol >= 0.0) {
            return fail(format!("fss_tol = {} must be non-negative", self.fss_tol));
        }
        if !(self.alpha_max > 0.0 && self.alpha_max <= 1.0) {
            return fail(format!("alpha_max = {} must lie in (0, 1]", self.alpha_max));
        }
        if self.validation_count < 10 {
            return fail(format!("validation_count = {} must be at least 10", self.validation_count));
        }
        if self.max_passes < 1 {
            return fail("max_passes must be at least 1".into());
        }
        if self.rss_training == RssTraining::Fresh && self.rss_fresh_count < 2 {
            return fail("rss_fresh_count must be at least 2".into());
        }
        if self.pdf_samples < 1000 {
            return fail(format!("pdf_samples = {} must be at least 1000", self.pdf_samples));
        }
        if self.histogram_bins < 1 {
            return fail("histogram_bins must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptiveConfig {
    pub screening: ScreeningConfig,
    pub pipeline: PipelineConfig,
    pub pce: PceConfig,
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        self.screening.validate()?;
        self.pipeline.validate()?;
        self.pce.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    FssAccepted,
    RssBuilt,
    /// Every pass left too many inputs active; the FSS is the best available.
    PassesExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRecord {
    pub pass: usize,
    pub tau: f64,
    pub s: usize,
    pub n_total: usize,
    pub active: Vec<usize>,
    pub alpha: f64,
    pub screening_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Error of the returned surrogate (the RSS when one was built).
    pub l2: f64,
    pub l2_fss: f64,
    pub l2_rss: Option<f64>,
    #[serde(with = "crate::io::extended_f64")]
    pub loo_fss: f64,
    #[serde(with = "crate::io::extended_f64_opt")]
    pub loo_rss: Option<f64>,
    pub alpha: f64,
    pub validation_count: usize,
    pub fss_training_count: usize,
    pub rss_training_count: Option<usize>,
    /// True when the validation suite is part of the training data.
    pub training_includes_validation: bool,
    pub histogram: Histogram,
    pub pdf_fss: PdfCurve,
    pub pdf_rss: Option<PdfCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub training_count: usize,
    #[serde(with = "crate::io::extended_f64_opt")]
    pub loo_fss: Option<f64>,
    #[serde(with = "crate::io::extended_f64_opt")]
    pub loo_rss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveResult {
    pub outcome: Outcome,
    pub ledger: EvaluationLedger,
    pub screening: Option<ScreeningReport>,
    pub passes: Vec<PassRecord>,
    pub fss: SparseSurrogate,
    pub rss: Option<SparseSurrogate>,
    pub validation: ValidationReport,
    pub convergence: Vec<ConvergenceRow>,
}

impl AdaptiveResult {
    pub fn converged(&self) -> bool {
        self.outcome != Outcome::PassesExhausted
    }

    /// Surrogate the run settled on.
    pub fn surrogate(&self) -> &SparseSurrogate {
        self.rss.as_ref().unwrap_or(&self.fss)
    }
}

/// Model values at `points`, evaluated concurrently and returned in order.
pub fn evaluate_points(model: &dyn Model, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    points.par_iter().map(|p| model.evaluate(p)).collect()
}

/// Draw and evaluate a batch, recording it under `tag`.
pub fn evaluate_batch(
    model: &dyn Model,
    space: &ParameterSpace,
    ledger: &mut EvaluationLedger,
    count: usize,
    scheme: SamplingScheme,
    tag: EvaluationTag,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let batch_id = ledger.allocate_batch();
    let points = space.sample_stream(count, scheme, seed, batch_id).points;
    let values = evaluate_points(model, &points)?;
    for (p, &v) in points.iter().zip(&values) {
        ledger.push(p.clone(), v, tag, batch_id, seed);
    }
    Ok((points, values))
}

/// Surrogate training data drawn from the ledger: screening base points in
/// ledger order, followed by the validation suite unless it is held out.
pub fn training_set(ledger: &EvaluationLedger, strict_holdout: bool) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut thetas = Vec::new();
    let mut values = Vec::new();
    for r in ledger.with_tag(EvaluationTag::ScreeningBase) {
        thetas.push(r.theta.clone());
        values.push(r.value);
    }
    if !strict_holdout {
        for r in ledger.with_tag(EvaluationTag::Validation) {
            thetas.push(r.theta.clone());
            values.push(r.value);
        }
    }
    (thetas, values)
}

/// The validation suite recorded in the ledger.
pub fn validation_suite(ledger: &EvaluationLedger) -> (Vec<Vec<f64>>, Vec<f64>) {
    ledger
        .with_tag(EvaluationTag::Validation)
        .map(|r| (r.theta.clone(), r.value))
        .unzip()
}

/// Values behind the comparison histogram: every evaluation except FD
/// stencil points.
pub fn histogram_values(ledger: &EvaluationLedger) -> Vec<f64> {
    ledger
        .records()
        .iter()
        .filter(|r| r.tag != EvaluationTag::ScreeningStencil)
        .map(|r| r.value)
        .collect()
}

/// Index of the inactive input with the largest screening metric.
pub fn enrichment_candidate(report: &ScreeningReport) -> Option<usize> {
    let nu = &report.last().nu;
    (0..nu.len())
        .filter(|i| !report.active.contains(i))
        .fold(None, |best: Option<usize>, i| match best {
            Some(b) if nu[b] >= nu[i] => Some(b),
            _ => Some(i),
        })
}

/// Validation report for already fitted surrogates.
#[allow(clippy::too_many_arguments)]
pub fn validation_report(
    fss: &SparseSurrogate,
    rss: Option<&SparseSurrogate>,
    alpha: f64,
    suite: (&[Vec<f64>], &[f64]),
    histogram_values: &[f64],
    space: &ParameterSpace,
    cfg: &PipelineConfig,
    training_includes_validation: bool,
    seed: u64,
) -> Result<ValidationReport> {
    let (thetas, values) = suite;
    let l2_fss = l2_error(values, &fss.predict_batch(thetas)?)?;
    let l2_rss = rss
        .map(|s| s.predict_batch(thetas).and_then(|p| l2_error(values, &p)))
        .transpose()?;
    let pdf_fss = output_distribution(fss, space, cfg.pdf_samples, seed)?;
    let pdf_rss = rss
        .map(|s| output_distribution(s, space, cfg.pdf_samples, seed))
        .transpose()?;
    Ok(ValidationReport {
        l2: l2_rss.unwrap_or(l2_fss),
        l2_fss,
        l2_rss,
        loo_fss: fss.diagnostics.loo,
        loo_rss: rss.map(|s| s.diagnostics.loo),
        alpha,
        validation_count: values.len(),
        fss_training_count: fss.diagnostics.training_count,
        rss_training_count: rss.map(|s| s.diagnostics.training_count),
        training_includes_validation,
        histogram: histogram(histogram_values, cfg.histogram_bins)?,
        pdf_fss,
        pdf_rss,
    })
}

/// LOO of surrogates refitted on growing prefixes of the training set.
pub fn convergence_table(
    space: &ParameterSpace,
    active: Option<&[usize]>,
    thetas: &[Vec<f64>],
    values: &[f64],
    pce: &PceConfig,
    step: usize,
) -> Vec<ConvergenceRow> {
    if step == 0 {
        return Vec::new();
    }
    let n = thetas.len();
    let mut counts: Vec<usize> = (1..).map(|k| k * step).take_while(|&c| c < n).collect();
    if n >= 2 {
        counts.push(n);
    }
    let nominal = space.nominal();
    counts
        .into_par_iter()
        .filter(|&c| c >= 2)
        .map(|c| {
            let (t, v) = (&thetas[..c], &values[..c]);
            let loo_fss = fit_pce(space, t, v, pce).ok().map(|s| s.diagnostics.loo);
            let loo_rss = active.and_then(|a| {
                fit_reduced_pce(space, a, &nominal, t, v, pce)
                    .ok()
                    .map(|s| s.diagnostics.loo)
            });
            ConvergenceRow {
                training_count: c,
                loo_fss,
                loo_rss,
            }
        })
        .collect()
}

fn fit_rss(
    model: &dyn Model,
    space: &ParameterSpace,
    active: &[usize],
    ledger: &mut EvaluationLedger,
    cfg: &AdaptiveConfig,
    seed: u64,
) -> Result<SparseSurrogate> {
    let nominal = space.nominal();
    match cfg.pipeline.rss_training {
        RssTraining::Ledger => {
            let (thetas, values) = training_set(ledger, cfg.pipeline.strict_holdout);
            fit_reduced_pce(space, active, &nominal, &thetas, &values, &cfg.pce)
        }
        RssTraining::Fresh => {
            let frozen = FrozenModel::new(model, space, active.to_vec(), nominal.clone())?;
            let sub = space.subspace(active)?;
            let batch_id = ledger.allocate_batch();
            let reduced = sub
                .sample_stream(cfg.pipeline.rss_fresh_count, SamplingScheme::LatinHypercube, seed, batch_id)
                .points;
            let values = evaluate_points(&frozen, &reduced)?;
            let full: Vec<Vec<f64>> = reduced.iter().map(|r| frozen.expand(r)).collect();
            for (t, &v) in full.iter().zip(&values) {
                ledger.push(t.clone(), v, EvaluationTag::RssTraining, batch_id, seed);
            }
            fit_reduced_pce(space, active, &nominal, &full, &values, &cfg.pce)
        }
    }
}

/// Run the adaptive strategy end to end.
pub fn run_adaptive(model: &dyn Model, space: &ParameterSpace, cfg: &AdaptiveConfig, seed: u64) -> Result<AdaptiveResult> {
    cfg.validate()?;
    if model.dimension() != space.dimension() {
        return Err(Error::DimensionMismatch {
            expected: model.dimension(),
            got: space.dimension(),
        });
    }
    let pc = &cfg.pipeline;
    let mut ledger = EvaluationLedger::new();

    evaluate_batch(
        model,
        space,
        &mut ledger,
        pc.validation_count,
        SamplingScheme::MonteCarlo,
        EvaluationTag::Validation,
        seed,
    )?;
    let (suite_t, suite_v) = validation_suite(&ledger);

    let mut screening_cfg = cfg.screening.clone();
    let mut screening = Screening::new(model, space, screening_cfg.clone(), seed)?;
    screening.initial_batch(&mut ledger)?;

    // The accuracy gate must not see the suite it is judged on.
    let (gate_t, gate_v) = training_set(&ledger, true);
    let gate = fit_pce(space, &gate_t, &gate_v, &cfg.pce)?;
    let l2_gate = l2_error(&suite_v, &gate.predict_batch(&suite_t)?)?;

    let mut passes = Vec::new();
    let mut report = None;
    let mut outcome = Outcome::PassesExhausted;
    let mut active = Vec::new();
    if l2_gate <= pc.fss_tol {
        outcome = Outcome::FssAccepted;
    } else {
        for pass in 0..pc.max_passes {
            if pass > 0 {
                screening_cfg.tau *= 0.5;
                screening = Screening::new(model, space, screening_cfg.clone(), seed)?;
                screening.initial_batch(&mut ledger)?;
            }
            while screening.can_continue() {
                screening.step(&mut ledger)?;
            }
            let r = screening.report();
            passes.push(PassRecord {
                pass,
                tau: screening_cfg.tau,
                s: r.last().s,
                n_total: r.n_total(),
                active: r.active.clone(),
                alpha: r.alpha,
                screening_converged: r.converged,
            });
            let accept = r.alpha <= pc.alpha_max;
            if accept {
                active = r.active.clone();
            }
            report = Some(r);
            if accept {
                outcome = Outcome::RssBuilt;
                break;
            }
        }
    }

    let rss = if outcome == Outcome::RssBuilt {
        Some(fit_rss(model, space, &active, &mut ledger, cfg, seed)?)
    } else {
        None
    };
    // The reported FSS is refitted on the final training set so that it can
    // be compared with the RSS at equal cost.
    let (train_t, train_v) = training_set(&ledger, pc.strict_holdout);
    let fss = if pc.strict_holdout && train_t.len() == gate.diagnostics.training_count {
        gate
    } else {
        fit_pce(space, &train_t, &train_v, &cfg.pce)?
    };
    let alpha = report.as_ref().map_or(1.0, |r| r.alpha);
    let validation = validation_report(
        &fss,
        rss.as_ref(),
        alpha,
        (&suite_t, &suite_v),
        &histogram_values(&ledger),
        space,
        pc,
        !pc.strict_holdout,
        seed,
    )?;
    let convergence = convergence_table(
        space,
        rss.as_ref().map(|_| active.as_slice()),
        &train_t,
        &train_v,
        &cfg.pce,
        pc.convergence_step,
    );
    Ok(AdaptiveResult {
        outcome,
        ledger,
        screening: report,
        passes,
        fss,
        rss,
        validation,
        convergence,
    })
}
