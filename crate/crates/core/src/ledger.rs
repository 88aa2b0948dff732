//! Append-only record of every model evaluation made during a run.

use serde::{Deserialize, Serialize};

use crate::dgsm::GradientSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationTag {
    Validation,
    ScreeningBase,
    ScreeningStencil,
    /// Fresh reduced-space design points (only when that training mode is on).
    RssTraining,
}

impl EvaluationTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            EvaluationTag::Validation => "validation",
            EvaluationTag::ScreeningBase => "screening_base",
            EvaluationTag::ScreeningStencil => "screening_stencil",
            EvaluationTag::RssTraining => "rss_training",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub theta: Vec<f64>,
    pub value: f64,
    pub tag: EvaluationTag,
    pub batch_id: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEntry {
    pub sample: GradientSample,
    pub batch_id: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationLedger {
    records: Vec<EvaluationRecord>,
    gradients: Vec<GradientEntry>,
    next_batch: u64,
}

impl EvaluationLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reserve a fresh batch id. Batch ids double as random stream ids.
    pub fn allocate_batch(&mut self) -> u64 {
        let id = self.next_batch;
        self.next_batch += 1;
        id
    }

    pub fn records(&self) -> &[EvaluationRecord] {
        &self.records
    }

    pub fn gradients(&self) -> &[GradientEntry] {
        &self.gradients
    }

    pub fn gradient_samples(&self) -> Vec<GradientSample> {
        self.gradients.iter().map(|e| e.sample.clone()).collect()
    }

    /// Number of screening base points (the running `N_total`).
    pub fn n_total(&self) -> usize {
        self.gradients.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, tag: EvaluationTag) -> usize {
        self.records.iter().filter(|r| r.tag == tag).count()
    }

    pub fn with_tag(&self, tag: EvaluationTag) -> impl Iterator<Item = &EvaluationRecord> {
        self.records.iter().filter(move |r| r.tag == tag)
    }

    pub fn push(&mut self, theta: Vec<f64>, value: f64, tag: EvaluationTag, batch_id: u64, seed: u64) {
        self.records.push(EvaluationRecord {
            theta,
            value,
            tag,
            batch_id,
            seed,
        });
    }

    /// Record a gradient batch: one base row and `N_p` stencil rows per sample.
    pub fn push_gradients(&mut self, samples: Vec<GradientSample>, batch_id: u64, seed: u64) {
        for sample in samples {
            self.push(sample.theta.clone(), sample.base_value, EvaluationTag::ScreeningBase, batch_id, seed);
            for (i, &v) in sample.stencil_values.iter().enumerate() {
                self.push(sample.stencil_point(i), v, EvaluationTag::ScreeningStencil, batch_id, seed);
            }
            self.gradients.push(GradientEntry {
                sample,
                batch_id,
                seed,
            });
        }
    }

    /// Checks that no batch holds the same `(theta, tag)` twice.
    pub fn has_duplicates(&self) -> bool {
        let mut keys: Vec<(u64, EvaluationTag, Vec<u64>)> = self
            .records
            .iter()
            .map(|r| (r.batch_id, r.tag, r.theta.iter().map(|x| x.to_bits()).collect()))
            .collect();
        keys.sort_by(|a, b| (a.0, a.1.as_str(), &a.2).cmp(&(b.0, b.1.as_str(), &b.2)));
        keys.windows(2).any(|w| w[0] == w[1])
    }
}
