//! Iterative DGSM screening.
//!
//! An initial batch of `n1` gradient samples gives a first estimate of the
//! screening metric and a parameter ranking. Further batches of
//! `ceil(beta * n1)` samples are appended until the ranking stops changing,
//! the largest relative change in `mu` falls below `tau`, and at least
//! `s_min` iterations have run (or `s_max` iterations are exhausted).
//! Parameters whose metric exceeds `tau_screen` times the largest metric form
//! the active set.

use serde::{Deserialize, Serialize};

use crate::dgsm::{default_steps, estimate_mu, gradient_batch, screening_metric, DEFAULT_REL_STEP};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvTable};
use crate::ledger::EvaluationLedger;
use crate::models::Model;
use crate::param_space::{ParameterSpace, SamplingScheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScreeningConfig {
    /// Tolerance on the maximum relative change of `mu` between iterations.
    pub tau: f64,
    /// Relative cut on `nu_i / max_j nu_j`.
    pub tau_screen: f64,
    pub s_min: usize,
    pub s_max: usize,
    /// Batch growth: each iteration draws `ceil(beta * n1)` samples.
    pub beta: f64,
    pub n1: usize,
    pub scheme: SamplingScheme,
    /// Finite-difference step relative to each input's scale.
    pub rel_step: f64,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        Self {
            tau: 0.1,
            tau_screen: 0.2,
            s_min: 3,
            s_max: 10,
            beta: 1.0,
            n1: 5,
            scheme: SamplingScheme::LatinHypercube,
            rel_step: DEFAULT_REL_STEP,
        }
    }
}

impl ScreeningConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(format!("screening: {m}")));
        if !(self.tau > 0.0) {
            return fail(format!("tau = {} must be positive", self.tau));
        }
        if !(self.tau_screen > 0.0 && self.tau_screen < 1.0) {
            return fail(format!("tau_screen = {} must lie in (0, 1)", self.tau_screen));
        }
        if self.s_min < 1 || self.s_max < 1 {
            return fail("s_min and s_max must be at least 1".into());
        }
        if self.s_min > self.s_max {
            return fail(format!("s_min = {} exceeds s_max = {}", self.s_min, self.s_max));
        }
        if !(self.beta > 0.0) {
            return fail(format!("beta = {} must be positive", self.beta));
        }
        if self.n1 < 1 {
            return fail("n1 must be at least 1".into());
        }
        if !(self.rel_step > 0.0) {
            return fail(format!("rel_step = {} must be positive", self.rel_step));
        }
        Ok(())
    }

    /// Samples drawn per iteration after the first.
    pub fn batch_size(&self) -> usize {
        (self.beta * self.n1 as f64).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningIteration {
    pub s: usize,
    pub n_total: usize,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    /// Parameter indices ordered by decreasing `nu`.
    pub ranks: Vec<usize>,
    /// Not defined for the first iteration of a screening call.
    #[serde(with = "crate::io::extended_f64_opt")]
    pub delta_mu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub labels: Vec<String>,
    pub iterations: Vec<ScreeningIteration>,
    /// Sorted active parameter indices.
    pub active: Vec<usize>,
    pub alpha: f64,
    pub converged: bool,
    pub tau_screen: f64,
}

impl ScreeningReport {
    pub fn last(&self) -> &ScreeningIteration {
        self.iterations.last().expect("a report always holds the initial iteration")
    }

    pub fn n_total(&self) -> usize {
        self.last().n_total
    }

    pub fn active_labels(&self) -> Vec<String> {
        self.active.iter().map(|&i| self.labels[i].clone()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per iteration: `s, N_total, delta_mu, nu_1..nu_Np`.
    pub fn to_csv(&self) -> CsvTable {
        let mut header = vec!["s".to_string(), "N_total".into(), "delta_mu".into()];
        header.extend((1..=self.labels.len()).map(|i| format!("nu_{i}")));
        let mut t = CsvTable::new(header);
        for it in &self.iterations {
            let mut row = vec![
                it.s.to_string(),
                it.n_total.to_string(),
                it.delta_mu.map(fmt_f64).unwrap_or_default(),
            ];
            row.extend(it.nu.iter().map(|&v| fmt_f64(v)));
            t.push(row);
        }
        t
    }
}

const RANK_QUANTUM: f64 = 1e8;

/// Parameter indices by decreasing `nu`, ties broken by ascending index.
///
/// Metrics are compared after rounding `nu_i / max(nu)` to `1e-8`, well above
/// the round-off of a finite-difference gradient, so exactly tied
/// sensitivities keep their index order.
pub fn rank_parameters(nu: &[f64]) -> Vec<usize> {
    let max = nu.iter().cloned().fold(0.0f64, f64::max);
    let key = |v: f64| if max > 0.0 { (v / max * RANK_QUANTUM).round() as i64 } else { 0 };
    let mut order: Vec<usize> = (0..nu.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(key(nu[i])), i));
    order
}

/// `max_i |mu_i - prev_i| / prev_i`, with `0/0 = 0` and `x/0 = inf`.
pub fn max_relative_change(mu: &[f64], prev: &[f64]) -> f64 {
    mu.iter()
        .zip(prev)
        .map(|(&m, &p)| {
            let diff = (m - p).abs();
            if p == 0.0 {
                if diff == 0.0 { 0.0 } else { f64::INFINITY }
            } else {
                diff / p
            }
        })
        .fold(0.0, f64::max)
}

/// Indices with `nu_i / max(nu) > tau_screen`.
pub fn active_set(nu: &[f64], tau_screen: f64) -> Vec<usize> {
    let max = nu.iter().cloned().fold(0.0f64, f64::max);
    (0..nu.len()).filter(|&i| max > 0.0 && nu[i] / max > tau_screen).collect()
}

/// Resumable screening run over a shared ledger.
pub struct Screening<'a> {
    model: &'a dyn Model,
    space: &'a ParameterSpace,
    cfg: ScreeningConfig,
    seed: u64,
    steps: Vec<f64>,
    iterations: Vec<ScreeningIteration>,
    done: bool,
}

impl<'a> Screening<'a> {
    pub fn new(model: &'a dyn Model, space: &'a ParameterSpace, cfg: ScreeningConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if model.dimension() != space.dimension() {
            return Err(Error::DimensionMismatch {
                expected: model.dimension(),
                got: space.dimension(),
            });
        }
        let steps = default_steps(space, cfg.rel_step);
        Ok(Self {
            model,
            space,
            cfg,
            seed,
            steps,
            iterations: Vec::new(),
            done: false,
        })
    }

    pub fn config(&self) -> &ScreeningConfig {
        &self.cfg
    }

    /// Iteration counter `s` (zero before the initial batch).
    pub fn s(&self) -> usize {
        self.iterations.last().map_or(0, |it| it.s)
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Whether another call to [`Screening::step`] is permitted.
    pub fn can_continue(&self) -> bool {
        !self.done && self.s() >= 1 && self.s() < self.cfg.s_max
    }

    fn draw(&self, ledger: &mut EvaluationLedger, count: usize) -> Result<()> {
        let batch_id = ledger.allocate_batch();
        let batch = self.space.sample_stream(count, self.cfg.scheme, self.seed, batch_id);
        let samples = gradient_batch(self.model, self.space, &batch.points, &self.steps)?;
        ledger.push_gradients(samples, batch_id, self.seed);
        Ok(())
    }

    fn estimate(&self, ledger: &EvaluationLedger) -> Result<(Vec<f64>, Vec<f64>)> {
        let samples = ledger.gradient_samples();
        let mu = estimate_mu(&samples)?;
        let nu = screening_metric(&mu, self.space)?;
        Ok((mu, nu))
    }

    /// Draw the `n1` initial samples and form the first estimate (`s = 1`).
    pub fn initial_batch(&mut self, ledger: &mut EvaluationLedger) -> Result<()> {
        if !self.iterations.is_empty() {
            return Err(Error::Config("initial screening batch already drawn".into()));
        }
        self.draw(ledger, self.cfg.n1)?;
        let (mu, nu) = self.estimate(ledger)?;
        let ranks = rank_parameters(&nu);
        self.iterations.push(ScreeningIteration {
            s: 1,
            n_total: ledger.n_total(),
            mu,
            nu,
            ranks,
            delta_mu: None,
        });
        Ok(())
    }

    /// One refinement iteration; returns whether the stopping test passed.
    pub fn step(&mut self, ledger: &mut EvaluationLedger) -> Result<bool> {
        if !self.can_continue() {
            return Ok(self.done);
        }
        let s = self.s() + 1;
        self.draw(ledger, self.cfg.batch_size())?;
        let (mu, nu) = self.estimate(ledger)?;
        let ranks = rank_parameters(&nu);
        let prev = self.iterations.last().expect("initial batch drawn");
        let delta = max_relative_change(&mu, &prev.mu);
        self.done = ranks == prev.ranks && delta <= self.cfg.tau && s >= self.cfg.s_min;
        self.iterations.push(ScreeningIteration {
            s,
            n_total: ledger.n_total(),
            mu,
            nu,
            ranks,
            delta_mu: Some(delta),
        });
        Ok(self.done)
    }

    pub fn report(&self) -> ScreeningReport {
        let last = self.iterations.last().expect("initial batch drawn");
        let active = active_set(&last.nu, self.cfg.tau_screen);
        ScreeningReport {
            labels: self.space.labels(),
            alpha: active.len() as f64 / self.space.dimension() as f64,
            active,
            iterations: self.iterations.clone(),
            converged: self.done,
            tau_screen: self.cfg.tau_screen,
        }
    }
}

/// Run the full screening loop, appending every evaluation to `ledger`.
pub fn run_screening(
    model: &dyn Model,
    space: &ParameterSpace,
    cfg: &ScreeningConfig,
    ledger: &mut EvaluationLedger,
    seed: u64,
) -> Result<ScreeningReport> {
    let mut screening = Screening::new(model, space, cfg.clone(), seed)?;
    screening.initial_batch(ledger)?;
    while screening.can_continue() {
        screening.step(ledger)?;
    }
    Ok(screening.report())
}
