//! Uncertain input parameters: marginal distributions, canonical transforms,
//! Poincaré constants and seeded sampling designs.
//!
//! Inputs are independent. Index order in a [`ParameterSpace`] is the
//! canonical order used by every downstream report (ranks, active sets,
//! gradient columns).

use std::f64::consts::PI;

use rand::distributions::Open01;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marginal law of a single input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistributionKind {
    Uniform { lower: f64, upper: f64 },
    /// Normal law parameterised by mean and *variance*.
    Normal { mean: f64, variance: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInput", into = "RawInput")]
pub struct InputDistribution {
    pub label: String,
    pub kind: DistributionKind,
}

impl InputDistribution {
    pub fn uniform(label: impl Into<String>, lower: f64, upper: f64) -> Result<Self> {
        Self::new(label.into(), DistributionKind::Uniform { lower, upper })
    }

    pub fn normal(label: impl Into<String>, mean: f64, variance: f64) -> Result<Self> {
        Self::new(label.into(), DistributionKind::Normal { mean, variance })
    }

    /// Normal input given its standard deviation rather than its variance.
    pub fn normal_std(label: impl Into<String>, mean: f64, std_dev: f64) -> Result<Self> {
        Self::new(
            label.into(),
            DistributionKind::Normal {
                mean,
                variance: std_dev * std_dev,
            },
        )
    }

    fn new(label: String, kind: DistributionKind) -> Result<Self> {
        let bad = |reason: &str| Error::InvalidDistribution {
            label: label.clone(),
            reason: reason.to_string(),
        };
        match kind {
            DistributionKind::Uniform { lower, upper } => {
                if !lower.is_finite() || !upper.is_finite() {
                    return Err(bad("bounds must be finite"));
                }
                if lower >= upper {
                    return Err(bad("uniform requires lower < upper"));
                }
            }
            DistributionKind::Normal { mean, variance } => {
                if !mean.is_finite() || !variance.is_finite() {
                    return Err(bad("mean and variance must be finite"));
                }
                if variance <= 0.0 {
                    return Err(bad("normal requires variance > 0"));
                }
            }
        }
        Ok(Self { label, kind })
    }

    /// Constant `C` in the DGSM bound `T_i <= C_i mu_i / V(G)`.
    pub fn poincare_constant(&self) -> f64 {
        match self.kind {
            DistributionKind::Uniform { lower, upper } => (upper - lower).powi(2) / (PI * PI),
            DistributionKind::Normal { variance, .. } => variance,
        }
    }

    /// Midpoint for uniform inputs, mean for normal inputs.
    pub fn nominal(&self) -> f64 {
        match self.kind {
            DistributionKind::Uniform { lower, upper } => 0.5 * (lower + upper),
            DistributionKind::Normal { mean, .. } => mean,
        }
    }

    /// Characteristic length used to scale finite-difference steps.
    pub fn scale(&self) -> f64 {
        match self.kind {
            DistributionKind::Uniform { lower, upper } => upper - lower,
            DistributionKind::Normal { variance, .. } => variance.sqrt(),
        }
    }

    pub fn upper_bound(&self) -> Option<f64> {
        match self.kind {
            DistributionKind::Uniform { upper, .. } => Some(upper),
            DistributionKind::Normal { .. } => None,
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.kind, DistributionKind::Uniform { .. })
    }

    pub fn in_support(&self, x: f64) -> bool {
        match self.kind {
            DistributionKind::Uniform { lower, upper } => x >= lower && x <= upper,
            DistributionKind::Normal { .. } => x.is_finite(),
        }
    }

    pub fn to_canonical(&self, x: f64) -> f64 {
        match self.kind {
            DistributionKind::Uniform { lower, upper } => 2.0 * (x - lower) / (upper - lower) - 1.0,
            DistributionKind::Normal { mean, variance } => (x - mean) / variance.sqrt(),
        }
    }

    pub fn from_canonical(&self, xi: f64) -> f64 {
        match self.kind {
            DistributionKind::Uniform { lower, upper } => lower + 0.5 * (xi + 1.0) * (upper - lower),
            DistributionKind::Normal { mean, variance } => mean + variance.sqrt() * xi,
        }
    }

    /// Inverse CDF on the open unit interval.
    pub fn quantile(&self, p: f64) -> f64 {
        match self.kind {
            DistributionKind::Uniform { lower, upper } => lower + p * (upper - lower),
            DistributionKind::Normal { mean, variance } => mean + variance.sqrt() * normal_quantile(p),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInput {
    label: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    std: Option<f64>,
}

impl TryFrom<RawInput> for InputDistribution {
    type Error = Error;

    fn try_from(raw: RawInput) -> Result<Self> {
        let missing = |field: &str| Error::InvalidDistribution {
            label: raw.label.clone(),
            reason: format!("missing field `{field}`"),
        };
        match raw.kind.as_str() {
            "uniform" => {
                let lower = raw.lower.ok_or_else(|| missing("lower"))?;
                let upper = raw.upper.ok_or_else(|| missing("upper"))?;
                InputDistribution::uniform(raw.label.clone(), lower, upper)
            }
            "normal" => {
                let mean = raw.mean.ok_or_else(|| missing("mean"))?;
                match (raw.variance, raw.std) {
                    (Some(v), None) => InputDistribution::normal(raw.label.clone(), mean, v),
                    (None, Some(s)) => InputDistribution::normal_std(raw.label.clone(), mean, s),
                    (Some(_), Some(_)) => Err(Error::InvalidDistribution {
                        label: raw.label.clone(),
                        reason: "give either `variance` or `std`, not both".into(),
                    }),
                    (None, None) => Err(missing("variance")),
                }
            }
            other => Err(Error::InvalidDistribution {
                label: raw.label.clone(),
                reason: format!("unknown kind `{other}` (expected `uniform` or `normal`)"),
            }),
        }
    }
}

impl From<InputDistribution> for RawInput {
    fn from(d: InputDistribution) -> Self {
        let mut raw = RawInput {
            label: d.label,
            kind: String::new(),
            lower: None,
            upper: None,
            mean: None,
            variance: None,
            std: None,
        };
        match d.kind {
            DistributionKind::Uniform { lower, upper } => {
                raw.kind = "uniform".into();
                raw.lower = Some(lower);
                raw.upper = Some(upper);
            }
            DistributionKind::Normal { mean, variance } => {
                raw.kind = "normal".into();
                raw.mean = Some(mean);
                raw.variance = Some(variance);
            }
        }
        raw
    }
}

/// Ordered list of independent inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace")]
pub struct ParameterSpace {
    inputs: Vec<InputDistribution>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpace {
    inputs: Vec<InputDistribution>,
}

impl TryFrom<RawSpace> for ParameterSpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        ParameterSpace::new(raw.inputs)
    }
}

impl ParameterSpace {
    pub fn new(inputs: Vec<InputDistribution>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::Config("parameter space needs at least one input".into()));
        }
        Ok(Self { inputs })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameter space serializes")
    }

    pub fn dimension(&self) -> usize {
        self.inputs.len()
    }

    pub fn inputs(&self) -> &[InputDistribution] {
        &self.inputs
    }

    pub fn labels(&self) -> Vec<String> {
        self.inputs.iter().map(|d| d.label.clone()).collect()
    }

    pub fn nominal(&self) -> Vec<f64> {
        self.inputs.iter().map(InputDistribution::nominal).collect()
    }

    pub fn poincare_constants(&self) -> Vec<f64> {
        self.inputs.iter().map(InputDistribution::poincare_constant).collect()
    }

    /// Sub-space holding the given coordinates, in the given order.
    pub fn subspace(&self, indices: &[usize]) -> Result<Self> {
        let inputs = indices
            .iter()
            .map(|&i| {
                self.inputs.get(i).cloned().ok_or(Error::DimensionMismatch {
                    expected: self.dimension(),
                    got: i + 1,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(inputs)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: len,
            });
        }
        Ok(())
    }

    pub fn to_canonical(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_len(theta.len())?;
        self.inputs
            .iter()
            .zip(theta)
            .enumerate()
            .map(|(i, (d, &x))| {
                if let DistributionKind::Uniform { lower, upper } = d.kind {
                    if !d.in_support(x) {
                        return Err(Error::OutsideSupport {
                            index: i,
                            label: d.label.clone(),
                            value: x,
                            lower,
                            upper,
                        });
                    }
                }
                Ok(d.to_canonical(x))
            })
            .collect()
    }

    /// Canonical coordinates without the support check; used by predictors
    /// that may legitimately extrapolate.
    pub fn to_canonical_unchecked(&self, theta: &[f64]) -> Vec<f64> {
        self.inputs.iter().zip(theta).map(|(d, &x)| d.to_canonical(x)).collect()
    }

    pub fn from_canonical(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.check_len(xi.len())?;
        Ok(self.inputs.iter().zip(xi).map(|(d, &x)| d.from_canonical(x)).collect())
    }

    pub fn sample(&self, count: usize, scheme: SamplingScheme, seed: u64) -> SampleBatch {
        self.sample_stream(count, scheme, seed, 0)
    }

    /// Draw a batch from an independent random stream. Batches with distinct
    /// `stream` ids are reproducible without replaying earlier streams.
    pub fn sample_stream(
        &self,
        count: usize,
        scheme: SamplingScheme,
        seed: u64,
        stream: u64,
    ) -> SampleBatch {
        let mut rng = stream_rng(seed, stream);
        let d = self.dimension();
        let mut points = vec![vec![0.0; d]; count];
        match scheme {
            SamplingScheme::MonteCarlo => {
                for point in points.iter_mut() {
                    for (x, dist) in point.iter_mut().zip(&self.inputs) {
                        let u: f64 = rng.sample(Open01);
                        *x = dist.quantile(u);
                    }
                }
            }
            SamplingScheme::LatinHypercube => {
                let mut strata: Vec<usize> = (0..count).collect();
                for (j, dist) in self.inputs.iter().enumerate() {
                    strata.shuffle(&mut rng);
                    for (point, &k) in points.iter_mut().zip(&strata) {
                        let u: f64 = rng.sample(Open01);
                        point[j] = dist.quantile((k as f64 + u) / count as f64);
                    }
                }
            }
        }
        SampleBatch {
            points,
            seed,
            stream,
            scheme,
        }
    }
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingScheme {
    #[serde(alias = "mc")]
    MonteCarlo,
    #[serde(alias = "lhs")]
    LatinHypercube,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    /// One row per point, physical coordinates.
    pub points: Vec<Vec<f64>>,
    pub seed: u64,
    pub stream: u64,
    pub scheme: SamplingScheme,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Standard normal quantile, Acklam's rational approximation
/// (absolute error below 1.15e-9 on (0, 1)).
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}
