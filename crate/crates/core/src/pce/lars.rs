//! Hybrid least-angle regression.
//!
//! The LARS path runs on centred, unit-norm copies of the non-constant
//! columns; the intercept is always in the model. After each variable enters,
//! ordinary least squares is refitted on the current support and scored by
//! its leave-one-out error. The support with the smallest LOO wins.

use crate::error::{Error, Result};
use crate::linalg::{dot, lstsq, Matrix};

/// Threshold below which a freshly orthogonalized column counts as dependent.
const DEPENDENT_TOL: f64 = 1e-10;
const SATURATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LarFit {
    /// Selected columns, sorted; always starts with column 0.
    pub support: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub loo: f64,
    /// LOO of each support along the path, intercept-only first.
    pub path_loo: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Incremental modified Gram-Schmidt factorisation of the standardized
/// active columns. Columns of `q` are stored contiguously.
struct IncrementalQr {
    n: usize,
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
}

impl IncrementalQr {
    fn new(n: usize) -> Self {
        Self {
            n,
            q: Vec::new(),
            r: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        self.q.len()
    }

    /// Append `z`; returns false (leaving the factorisation unchanged) when
    /// `z` is numerically in the span of the existing columns.
    fn push(&mut self, z: &[f64]) -> bool {
        let k = self.q.len();
        let mut v = z.to_vec();
        let mut coef = vec![0.0; k];
        // Two passes keep the columns orthogonal to working precision.
        for _ in 0..2 {
            for (j, qj) in self.q.iter().enumerate() {
                let c = dot(qj, &v);
                coef[j] += c;
                for (vi, qi) in v.iter_mut().zip(qj) {
                    *vi -= c * qi;
                }
            }
        }
        let rho = dot(&v, &v).sqrt();
        if rho < DEPENDENT_TOL * dot(z, z).sqrt().max(f64::MIN_POSITIVE) {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= rho);
        coef.push(rho);
        self.q.push(v);
        self.r.push(coef);
        debug_assert_eq!(self.q[k].len(), self.n);
        true
    }

    /// Solve `R^T R w = s`.
    fn solve_normal(&self, s: &[f64]) -> Vec<f64> {
        let k = self.len();
        let mut v = vec![0.0; k];
        for i in 0..k {
            let mut acc = s[i];
            for j in 0..i {
                acc -= self.r[i][j] * v[j];
            }
            v[i] = acc / self.r[i][i];
        }
        let mut w = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = v[i];
            for j in i + 1..k {
                acc -= self.r[j][i] * w[j];
            }
            w[i] = acc / self.r[i][i];
        }
        w
    }

    /// Plain hat-matrix LOO of the intercept plus the current columns.
    fn loo(&self, yc: &[f64], sst: f64) -> Option<f64> {
        let n = self.n;
        let mut resid = yc.to_vec();
        let mut h = vec![1.0 / n as f64; n];
        for qj in &self.q {
            let c = dot(qj, yc);
            for i in 0..n {
                resid[i] -= c * qj[i];
                h[i] += qj[i] * qj[i];
            }
        }
        if h.iter().any(|&hi| hi >= 1.0 - SATURATION_TOL) {
            return None;
        }
        let num: f64 = resid.iter().zip(&h).map(|(e, hi)| (e / (1.0 - hi)).powi(2)).sum();
        Some(loo_ratio(num, sst))
    }
}

pub(crate) fn loo_ratio(num: f64, sst: f64) -> f64 {
    if sst == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / sst
    }
}

/// Hybrid LAR on a design whose column 0 is the constant term.
///
/// At most `n / 2` terms (intercept included) are ever selected, so every
/// scored support leaves at least as many residual degrees of freedom as it
/// has coefficients.
pub fn hybrid_lar(x: &Matrix, y: &[f64]) -> Result<LarFit> {
    let (n, p) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if n < 2 {
        return Err(Error::Regression(format!("need at least 2 training points, got {n}")));
    }
    if p == 0 {
        return Err(Error::Regression("empty design matrix".into()));
    }
    let mut warnings = Vec::new();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - ybar).collect();
    let sst = dot(&yc, &yc);

    // Standardized candidate columns.
    let mut z: Vec<Option<Vec<f64>>> = vec![None; p];
    for (j, zj) in z.iter_mut().enumerate().skip(1) {
        let col = x.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let c: Vec<f64> = col.iter().map(|v| v - mean).collect();
        let s = dot(&c, &c).sqrt();
        let scale = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if s > DEPENDENT_TOL * scale * (n as f64).sqrt() {
            *zj = Some(c.into_iter().map(|v| v / s).collect());
        }
    }

    let mut qr = IncrementalQr::new(n);
    let mut active: Vec<usize> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    let mut excluded = vec![false; p];
    excluded[0] = true;
    for (j, zj) in z.iter().enumerate() {
        if zj.is_none() {
            excluded[j] = true;
        }
    }

    let intercept_loo = {
        let h = 1.0 / n as f64;
        loo_ratio(sst / (1.0 - h).powi(2), sst)
    };
    let mut path_loo = vec![intercept_loo];
    let mut best = (intercept_loo, 0usize);
    // Keep at least as many residual degrees of freedom as coefficients.
    // Closer to interpolation the LOO of a single support is so noisy that
    // the path minimum picks lucky supports rather than good ones.
    let max_terms = (n / 2).max(1).min(p);
    let mut mu = vec![0.0; n];

    if sst > 0.0 {
        loop {
            if active.len() + 1 >= max_terms {
                break;
            }
            let resid: Vec<f64> = yc.iter().zip(&mu).map(|(a, b)| a - b).collect();
            let corr: Vec<f64> = z
                .iter()
                .map(|zj| zj.as_ref().map_or(0.0, |c| dot(c, &resid)))
                .collect();
            let cmax = (0..p)
                .filter(|&j| !excluded[j])
                .map(|j| corr[j].abs())
                .fold(0.0f64, f64::max);
            if cmax <= 1e-14 * sst.sqrt() {
                break;
            }
            // Enter the most correlated admissible column.
            let mut entered = false;
            let mut candidates: Vec<usize> = (0..p).filter(|&j| !excluded[j]).collect();
            candidates.sort_by(|&a, &b| corr[b].abs().total_cmp(&corr[a].abs()).then(a.cmp(&b)));
            for j in candidates {
                if qr.push(z[j].as_ref().expect("admissible column")) {
                    active.push(j);
                    signs.push(corr[j].signum());
                    excluded[j] = true;
                    entered = true;
                    break;
                }
                excluded[j] = true;
                warnings.push(format!("column {j} is linearly dependent on the support; skipped"));
            }
            if !entered {
                break;
            }

            match qr.loo(&yc, sst) {
                Some(l) => {
                    path_loo.push(l);
                    if l < best.0 {
                        best = (l, active.len());
                    }
                    // A perfect fit cannot be improved on.
                    if l <= 1e-24 {
                        break;
                    }
                }
                None => {
                    path_loo.push(f64::INFINITY);
                    warnings.push(format!("support of {} terms saturates the fit; not scored", active.len() + 1));
                }
            }

            // Equiangular direction and step length.
            let w = qr.solve_normal(&signs);
            let norm = dot(&signs, &w);
            if !(norm > 0.0) {
                break;
            }
            let a_a = 1.0 / norm.sqrt();
            let mut u = vec![0.0; n];
            for (k, &j) in active.iter().enumerate() {
                let c = a_a * w[k];
                for (ui, zi) in u.iter_mut().zip(z[j].as_ref().unwrap()) {
                    *ui += c * zi;
                }
            }
            let c_act = active.iter().map(|&j| corr[j].abs()).fold(0.0f64, f64::max);
            let mut gamma = c_act / a_a;
            for j in 0..p {
                if excluded[j] {
                    continue;
                }
                let aj = dot(z[j].as_ref().unwrap(), &u);
                for g in [(c_act - corr[j]) / (a_a - aj), (c_act + corr[j]) / (a_a + aj)] {
                    if g > 1e-15 && g < gamma {
                        gamma = g;
                    }
                }
            }
            for (m, ui) in mu.iter_mut().zip(&u) {
                *m += gamma * ui;
            }
        }
    }

    let mut support = vec![0];
    support.extend_from_slice(&active[..best.1]);
    support.sort_unstable();
    let coefficients = lstsq(&x.select_columns(&support), y)
        .map_err(|e| Error::Regression(format!("refit on selected support failed: {e}")))?;
    Ok(LarFit {
        support,
        coefficients,
        loo: best.0,
        path_loo,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pce::basis::MultiIndexBasis;
    use crate::param_space::{InputDistribution, ParameterSpace, SamplingScheme};

    fn design(n: usize, p: usize, seed: u64) -> (MultiIndexBasis, Matrix) {
        let space = ParameterSpace::new(vec![
            InputDistribution::uniform("a", -1.0, 1.0).unwrap(),
            InputDistribution::uniform("b", -1.0, 1.0).unwrap(),
        ])
        .unwrap();
        let basis = MultiIndexBasis::for_space(&space, p).unwrap();
        let pts = space.sample(n, SamplingScheme::LatinHypercube, seed).points;
        let x = basis.design_matrix(&pts).unwrap();
        (basis, x)
    }

    #[test]
    fn recovers_two_term_expansion() {
        let (_, x) = design(50, 2, 3);
        let y: Vec<f64> = (0..50).map(|i| 2.0 * x.get(i, 0) + 0.5 * x.get(i, 3)).collect();
        let fit = hybrid_lar(&x, &y).unwrap();
        assert_eq!(fit.support, vec![0, 3]);
        // Independent oracle: least squares on the known support.
        let oracle = lstsq(&x.select_columns(&[0, 3]), &y).unwrap();
        for (c, o) in fit.coefficients.iter().zip(&oracle) {
            assert!((c - o).abs() < 1e-8);
        }
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-8 && (fit.coefficients[1] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn constant_response() {
        let (_, x) = design(20, 3, 4);
        let fit = hybrid_lar(&x, &[3.25; 20]).unwrap();
        assert_eq!(fit.support, vec![0]);
        assert!((fit.coefficients[0] - 3.25).abs() < 1e-14);
        assert_eq!(fit.loo, 0.0);
    }

    #[test]
    fn exact_polynomial_has_vanishing_loo() {
        let (_, x) = design(40, 3, 5);
        let y: Vec<f64> = (0..40)
            .map(|i| (0..x.cols()).map(|k| x.get(i, k) * (1.0 + k as f64) * 0.3).sum())
            .collect();
        let fit = hybrid_lar(&x, &y).unwrap();
        assert!(fit.loo <= 1e-10, "{}", fit.loo);
    }

    #[test]
    fn incremental_qr_detects_dependence() {
        let mut qr = IncrementalQr::new(4);
        assert!(qr.push(&[1.0, 0.0, 1.0, 0.0]));
        assert!(qr.push(&[0.0, 1.0, 0.0, 1.0]));
        assert!(!qr.push(&[2.0, -3.0, 2.0, -3.0]));
        assert_eq!(qr.len(), 2);
        assert!(qr.push(&[1.0, 0.0, 0.0, 0.0]));
        let w = qr.solve_normal(&[1.0, 1.0, 1.0]);
        // Independent check of R^T R w = s through the original columns.
        let cols = [[1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0], [1.0, 0.0, 0.0, 0.0]];
        let u: Vec<f64> = (0..4).map(|i| (0..3).map(|k| cols[k][i] * w[k]).sum()).collect();
        for c in &cols {
            assert!((dot(c, &u) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn duplicated_columns_never_share_the_support() {
        let (_, x) = design(30, 2, 6);
        let mut rows = Vec::new();
        for i in 0..30 {
            let mut r = x.row(i).to_vec();
            r.push(r[1]);
            rows.push(r);
        }
        let xd = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..30).map(|i| 1.0 + xd.get(i, 1) + 0.5 * xd.get(i, 2) + 0.01 * (i as f64).sin()).collect();
        let fit = hybrid_lar(&xd, &y).unwrap();
        assert!(!(fit.support.contains(&1) && fit.support.contains(&6)));
    }

    #[test]
    fn support_capped_at_half_the_sample_count() {
        let (_, x) = design(8, 4, 7);
        let y: Vec<f64> = (0..8).map(|i| ((i * 7919) % 13) as f64).collect();
        let fit = hybrid_lar(&x, &y).unwrap();
        assert!(fit.support.len() <= 4);
    }
}
