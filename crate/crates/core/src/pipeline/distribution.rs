//! Output distributions: histograms, Gaussian kernel density estimates and
//! the relative prediction error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::param_space::{ParameterSpace, SamplingScheme};
use crate::pce::SparseSurrogate;

/// Random stream reserved for surrogate propagation samples.
pub const PROPAGATION_STREAM: u64 = u64::MAX - 1;

/// Grid size of the density curves.
pub const KDE_GRID: usize = 512;

/// Kernels are truncated at this many bandwidths.
const KERNEL_CUTOFF: f64 = 9.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    /// Normalized so that `sum(density * width) = 1`.
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn area(&self) -> f64 {
        self.density
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum()
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["lower", "upper", "density"]);
        for (d, w) in self.density.iter().zip(self.edges.windows(2)) {
            t.push_numbers(&[w[0], w[1], *d]);
        }
        t
    }
}

/// Equal-width histogram with unit area. A constant sample is placed in the
/// middle bin of a unit-width window around its value.
pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::EmptySamples);
    }
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("histogram of non-finite values".into()));
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = values.len() as f64;
    let density = counts.iter().map(|&c| c as f64 / (n * width)).collect();
    Ok(Histogram { edges, density })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub sample_count: usize,
    pub mean: f64,
    pub std_dev: f64,
    /// Grid point of the largest density.
    pub mode: f64,
}

impl PdfCurve {
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["x", "density"]);
        for (x, d) in self.grid.iter().zip(&self.density) {
            t.push_numbers(&[*x, *d]);
        }
        t
    }
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

/// Silverman's rule `0.9 min(sigma, IQR/1.34) n^(-1/5)`, falling back to
/// `sigma` alone when the interquartile range vanishes.
pub fn silverman_bandwidth(sorted: &[f64]) -> Result<f64> {
    let n = sorted.len();
    if n < 2 {
        return Err(Error::EmptySamples);
    }
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sigma = var.sqrt();
    if !(sigma > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let spread = if iqr > 0.0 { sigma.min(iqr / 1.34) } else { sigma };
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

/// Gaussian kernel density estimate on a uniform grid spanning the sample
/// range padded by three bandwidths.
pub fn kde(values: &[f64], grid_points: usize) -> Result<PdfCurve> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("density estimate of non-finite values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = silverman_bandwidth(&sorted)?;
    let n = sorted.len();
    let lo = sorted[0] - 3.0 * h;
    let hi = sorted[n - 1] + 3.0 * h;
    let m = grid_points.max(2);
    let dx = (hi - lo) / (m - 1) as f64;
    let grid: Vec<f64> = (0..m).map(|k| lo + k as f64 * dx).collect();
    let norm = 1.0 / (n as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let density: Vec<f64> = grid
        .par_iter()
        .map(|&x| {
            let a = sorted.partition_point(|&v| v < x - KERNEL_CUTOFF * h);
            let b = sorted.partition_point(|&v| v <= x + KERNEL_CUTOFF * h);
            sorted[a..b]
                .iter()
                .map(|&v| {
                    let u = (x - v) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std_dev = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let k = density
        .iter()
        .enumerate()
        .fold(0, |best, (k, &d)| if d > density[best] { k } else { best });
    Ok(PdfCurve {
        mode: grid[k],
        grid,
        density,
        bandwidth: h,
        sample_count: n,
        mean,
        std_dev,
    })
}

/// Surrogate predictions at `n_samples` Monte Carlo draws from `space`.
pub fn propagate(surrogate: &SparseSurrogate, space: &ParameterSpace, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    if space.dimension() != surrogate.input_dimension() {
        return Err(Error::DimensionMismatch {
            expected: surrogate.input_dimension(),
            got: space.dimension(),
        });
    }
    let batch = space.sample_stream(n_samples, SamplingScheme::MonteCarlo, seed, PROPAGATION_STREAM);
    surrogate.predict_batch(&batch.points)
}

/// Density of the surrogate output under the input distribution.
pub fn output_distribution(
    surrogate: &SparseSurrogate,
    space: &ParameterSpace,
    n_samples: usize,
    seed: u64,
) -> Result<PdfCurve> {
    if n_samples < 1000 {
        return Err(Error::Config(format!("output distribution needs at least 1000 samples, got {n_samples}")));
    }
    kde(&propagate(surrogate, space, n_samples, seed)?, KDE_GRID)
}

/// `||g - g_hat|| / ||g||`.
pub fn l2_error(reference: &[f64], predicted: &[f64]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptySamples);
    }
    if reference.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            got: predicted.len(),
        });
    }
    let den: f64 = reference.iter().map(|g| g * g).sum();
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    let num: f64 = reference.iter().zip(predicted).map(|(g, p)| (g - p).powi(2)).sum();
    Ok((num / den).sqrt())
}
