//! Semilinear elliptic benchmark
//!
//! ```text
//!   -kappa * Lap(u) + c * u^3 = q   on (0,1)^2,   u = 0 on the boundary,
//!   q(x, y) = sum_{i=1..8} alpha_i sin(i pi x / 8) cos(i pi y / 8)
//! ```
//!
//! discretised with the 5-point Laplacian on `grid_n x grid_n` interior nodes
//! (`h = 1 / (grid_n + 1)`, boundary nodes carry the Dirichlet value) and
//! solved by Newton's method from a zero initial guess. The Jacobian
//! `kappa/h^2 * A + diag(3 c u^2)` is symmetric positive definite and is
//! factored with a banded Cholesky (half-bandwidth `grid_n`).
//!
//! The quantity of interest is the mean of `u` over `D = [2/5, 3/5]^2`,
//! computed from the nodes lying in `D` (midpoint rule on the node cells).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::Model;
use crate::error::{Error, Result};
use crate::param_space::{InputDistribution, ParameterSpace};

const SOURCE_MODES: usize = 8;
const QOI_LOWER: f64 = 0.4;
const QOI_UPPER: f64 = 0.6;
/// Maximum chord iterations reusing the base Jacobian for a stencil point.
const CHORD_MAX_ITER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EllipticConfig {
    /// Interior nodes per axis.
    pub grid_n: usize,
    /// Stopping tolerance on the residual infinity norm.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for EllipticConfig {
    fn default() -> Self {
        Self {
            grid_n: 100,
            newton_tol: 1e-10,
            newton_max_iter: 50,
        }
    }
}

impl EllipticConfig {
    pub fn with_grid(grid_n: usize) -> Self {
        Self {
            grid_n,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_n < 8 {
            return Err(Error::Config(format!("grid_n = {} must be at least 8", self.grid_n)));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::Config(format!("newton_tol = {} must be positive", self.newton_tol)));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::Config("newton_max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Converged discrete field on the interior nodes, row-major with
/// `values[j * n + i] = u(x_i, y_j)`, `x_i = (i + 1) h`.
#[derive(Debug, Clone)]
pub struct EllipticField {
    pub grid_n: usize,
    pub values: Vec<f64>,
    /// Newton updates performed.
    pub newton_iterations: usize,
    pub residual: f64,
}

impl EllipticField {
    pub fn spacing(&self) -> f64 {
        1.0 / (self.grid_n as f64 + 1.0)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid_n + i]
    }

    /// Mean over the nodes inside `[2/5, 3/5]^2`.
    pub fn qoi(&self) -> f64 {
        let n = self.grid_n;
        let h = self.spacing();
        let inside: Vec<usize> = (0..n)
            .filter(|&i| {
                let x = (i + 1) as f64 * h;
                x >= QOI_LOWER - 1e-12 && x <= QOI_UPPER + 1e-12
            })
            .collect();
        let mut sum = 0.0;
        for &j in &inside {
            for &i in &inside {
                sum += self.at(i, j);
            }
        }
        sum / (inside.len() * inside.len()) as f64
    }
}

/// Elliptic inputs: `kappa ~ U[0.05, 0.1]`, `c ~ U[1, 2]`, `alpha_i ~ U[0, 4]`.
pub fn elliptic_space() -> ParameterSpace {
    let mut inputs = vec![
        InputDistribution::uniform("kappa", 0.05, 0.1).expect("valid"),
        InputDistribution::uniform("c", 1.0, 2.0).expect("valid"),
    ];
    for i in 1..=SOURCE_MODES {
        inputs.push(InputDistribution::uniform(format!("alpha_{i}"), 0.0, 4.0).expect("valid"));
    }
    ParameterSpace::new(inputs).expect("non-empty")
}

struct Params<'a> {
    kappa: f64,
    c: f64,
    alpha: &'a [f64],
}

fn split_theta(theta: &[f64]) -> Result<Params<'_>> {
    if theta.len() != 2 + SOURCE_MODES {
        return Err(Error::DimensionMismatch {
            expected: 2 + SOURCE_MODES,
            got: theta.len(),
        });
    }
    let (kappa, c) = (theta[0], theta[1]);
    if !(kappa > 0.0) {
        return Err(Error::Domain(format!("kappa = {kappa} must be positive")));
    }
    if !(c >= 0.0) {
        return Err(Error::Domain(format!("c = {c} must be non-negative")));
    }
    Ok(Params {
        kappa,
        c,
        alpha: &theta[2..],
    })
}

fn source_grid(n: usize, alpha: &[f64]) -> Vec<f64> {
    let h = 1.0 / (n as f64 + 1.0);
    let mut sin_tab = vec![0.0; SOURCE_MODES * n];
    let mut cos_tab = vec![0.0; SOURCE_MODES * n];
    for m in 0..SOURCE_MODES {
        let w = (m + 1) as f64 * PI / 8.0;
        for i in 0..n {
            let x = (i + 1) as f64 * h;
            sin_tab[m * n + i] = (w * x).sin();
            cos_tab[m * n + i] = (w * x).cos();
        }
    }
    let mut q = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            q[j * n + i] = (0..SOURCE_MODES)
                .map(|m| alpha[m] * sin_tab[m * n + i] * cos_tab[m * n + j])
                .sum();
        }
    }
    q
}

/// Residual `kappa/h^2 A u + c u^3 - q` written into `out`; returns its
/// infinity norm.
fn residual(n: usize, kappa: f64, c: f64, q: &[f64], u: &[f64], out: &mut [f64]) -> f64 {
    let h = 1.0 / (n as f64 + 1.0);
    let s = kappa / (h * h);
    let mut norm = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let k = j * n + i;
            let mut lap = 4.0 * u[k];
            if i > 0 {
                lap -= u[k - 1];
            }
            if i + 1 < n {
                lap -= u[k + 1];
            }
            if j > 0 {
                lap -= u[k - n];
            }
            if j + 1 < n {
                lap -= u[k + n];
            }
            let r = s * lap + c * u[k] * u[k] * u[k] - q[k];
            out[k] = r;
            norm = norm.max(r.abs());
        }
    }
    norm
}

/// Banded Cholesky factor of the Newton Jacobian. Row `k` stores columns
/// `k - b ..= k` at offsets `0 ..= b`, with `b = grid_n`.
struct BandCholesky {
    size: usize,
    band: usize,
    rows: Vec<f64>,
}

impl BandCholesky {
    fn jacobian(n: usize, kappa: f64, c: f64, u: &[f64]) -> Result<Self> {
        let h = 1.0 / (n as f64 + 1.0);
        let s = kappa / (h * h);
        let size = n * n;
        let b = n;
        let w = b + 1;
        let mut rows = vec![0.0; size * w];
        for j in 0..n {
            for i in 0..n {
                let k = j * n + i;
                let row = &mut rows[k * w..(k + 1) * w];
                row[b] = 4.0 * s + 3.0 * c * u[k] * u[k];
                if i > 0 {
                    row[b - 1] = -s;
                }
                if j > 0 {
                    row[0] = -s;
                }
            }
        }
        let mut f = Self { size, band: b, rows };
        f.factor()?;
        Ok(f)
    }

    fn factor(&mut self) -> Result<()> {
        let b = self.band;
        let w = b + 1;
        for k in 0..self.size {
            let k0 = k.saturating_sub(b);
            for col in k0..=k {
                let j0 = col.saturating_sub(b);
                let m0 = k0.max(j0);
                // Dot product of L(k, m0..col) and L(col, m0..col).
                let rk = &self.rows[k * w + (m0 + b - k)..k * w + (col + b - k)];
                let rc = &self.rows[col * w + (m0 + b - col)..col * w + b];
                let dot: f64 = rk.iter().zip(rc).map(|(a, c)| a * c).sum();
                let idx = k * w + (col + b - k);
                let v = self.rows[idx] - dot;
                if col == k {
                    if !(v > 0.0) {
                        return Err(Error::Domain("Newton Jacobian is not positive definite".into()));
                    }
                    self.rows[idx] = v.sqrt();
                } else {
                    self.rows[idx] = v / self.rows[col * w + b];
                }
            }
        }
        Ok(())
    }

    /// Solve `L L^T x = rhs` in place.
    fn solve(&self, x: &mut [f64]) {
        let b = self.band;
        let w = b + 1;
        for k in 0..self.size {
            let k0 = k.saturating_sub(b);
            let row = &self.rows[k * w..(k + 1) * w];
            let dot: f64 = row[k0 + b - k..b].iter().zip(&x[k0..k]).map(|(l, y)| l * y).sum();
            x[k] = (x[k] - dot) / row[b];
        }
        for k in (0..self.size).rev() {
            x[k] /= self.rows[k * w + b];
            let xk = x[k];
            let k0 = k.saturating_sub(b);
            let row = &self.rows[k * w..(k + 1) * w];
            for (m, l) in (k0..k).zip(&row[k0 + b - k..b]) {
                x[m] -= l * xk;
            }
        }
    }
}

struct NewtonOutcome {
    u: Vec<f64>,
    iterations: usize,
    residual: f64,
    factor: Option<BandCholesky>,
}

fn newton(n: usize, kappa: f64, c: f64, q: &[f64], u0: Vec<f64>, cfg: &EllipticConfig) -> Result<NewtonOutcome> {
    let size = n * n;
    let mut u = u0;
    let mut r = vec![0.0; size];
    let mut trial = vec![0.0; size];
    let mut r_trial = vec![0.0; size];
    let mut norm = residual(n, kappa, c, q, &u, &mut r);
    let mut factor = None;
    let mut iterations = 0;
    while norm > cfg.newton_tol {
        if iterations == cfg.newton_max_iter {
            return Err(Error::NewtonDivergence {
                iterations,
                residual: norm,
            });
        }
        let jac = BandCholesky::jacobian(n, kappa, c, &u)?;
        let mut delta = r.clone();
        jac.solve(&mut delta);
        // Backtrack on the residual 2-norm if the full step overshoots.
        let r2: f64 = r.iter().map(|v| v * v).sum();
        let mut step = 1.0;
        let mut new_norm;
        loop {
            for ((t, &uk), &dk) in trial.iter_mut().zip(&u).zip(&delta) {
                *t = uk - step * dk;
            }
            new_norm = residual(n, kappa, c, q, &trial, &mut r_trial);
            let t2: f64 = r_trial.iter().map(|v| v * v).sum();
            if t2 <= r2 || step < 1e-3 {
                break;
            }
            step *= 0.5;
        }
        std::mem::swap(&mut u, &mut trial);
        std::mem::swap(&mut r, &mut r_trial);
        norm = new_norm;
        factor = Some(jac);
        iterations += 1;
    }
    Ok(NewtonOutcome {
        u,
        iterations,
        residual: norm,
        factor,
    })
}

/// Solve `-kappa Lap(u) + c u^3 = source` with homogeneous Dirichlet data.
pub fn solve_semilinear(
    kappa: f64,
    c: f64,
    source: impl Fn(f64, f64) -> f64,
    cfg: &EllipticConfig,
) -> Result<EllipticField> {
    cfg.validate()?;
    let n = cfg.grid_n;
    let h = 1.0 / (n as f64 + 1.0);
    let mut q = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            q[j * n + i] = source((i + 1) as f64 * h, (j + 1) as f64 * h);
        }
    }
    let out = newton(n, kappa, c, &q, vec![0.0; n * n], cfg)?;
    Ok(EllipticField {
        grid_n: n,
        values: out.u,
        newton_iterations: out.iterations,
        residual: out.residual,
    })
}

/// Solve the benchmark PDE at `theta = [kappa, c, alpha_1..alpha_8]`.
pub fn elliptic_solve(theta: &[f64], cfg: &EllipticConfig) -> Result<EllipticField> {
    cfg.validate()?;
    let p = split_theta(theta)?;
    let n = cfg.grid_n;
    let q = source_grid(n, p.alpha);
    let out = newton(n, p.kappa, p.c, &q, vec![0.0; n * n], cfg)?;
    Ok(EllipticField {
        grid_n: n,
        values: out.u,
        newton_iterations: out.iterations,
        residual: out.residual,
    })
}

/// Mean of the solution over `[2/5, 3/5]^2`.
pub fn elliptic_qoi(theta: &[f64], cfg: &EllipticConfig) -> Result<f64> {
    Ok(elliptic_solve(theta, cfg)?.qoi())
}

#[derive(Debug, Clone, Default)]
pub struct EllipticModel {
    cfg: EllipticConfig,
}

impl EllipticModel {
    pub fn new(cfg: EllipticConfig) -> Self {
        Self { cfg }
    }

    pub fn config(&self) -> &EllipticConfig {
        &self.cfg
    }

    /// Converge a perturbed problem starting from `base`, reusing `factor`
    /// as a fixed Jacobian; falls back to full Newton from `base`.
    fn solve_near(&self, theta: &[f64], base: &[f64], factor: Option<&BandCholesky>) -> Result<f64> {
        let p = split_theta(theta)?;
        let n = self.cfg.grid_n;
        let q = source_grid(n, p.alpha);
        if let Some(jac) = factor {
            let mut u = base.to_vec();
            let mut r = vec![0.0; n * n];
            let mut norm = residual(n, p.kappa, p.c, &q, &u, &mut r);
            let mut prev = f64::INFINITY;
            for _ in 0..CHORD_MAX_ITER {
                if norm <= self.cfg.newton_tol {
                    let field = EllipticField {
                        grid_n: n,
                        values: u,
                        newton_iterations: 0,
                        residual: norm,
                    };
                    return Ok(field.qoi());
                }
                if norm >= prev {
                    break;
                }
                jac.solve(&mut r);
                for (uk, dk) in u.iter_mut().zip(&r) {
                    *uk -= dk;
                }
                prev = norm;
                norm = residual(n, p.kappa, p.c, &q, &u, &mut r);
            }
            if norm <= self.cfg.newton_tol {
                return Ok(EllipticField {
                    grid_n: n,
                    values: u,
                    newton_iterations: 0,
                    residual: norm,
                }
                .qoi());
            }
        }
        let out = newton(n, p.kappa, p.c, &q, base.to_vec(), &self.cfg)?;
        Ok(EllipticField {
            grid_n: n,
            values: out.u,
            newton_iterations: out.iterations,
            residual: out.residual,
        }
        .qoi())
    }
}

impl Model for EllipticModel {
    fn name(&self) -> &str {
        "elliptic"
    }

    fn reference_space(&self) -> ParameterSpace {
        elliptic_space()
    }

    fn dimension(&self) -> usize {
        2 + SOURCE_MODES
    }

    fn evaluate(&self, theta: &[f64]) -> Result<f64> {
        elliptic_qoi(theta, &self.cfg)
    }

    fn evaluate_stencil(&self, base: &[f64], neighbors: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
        self.cfg.validate()?;
        let p = split_theta(base)?;
        let n = self.cfg.grid_n;
        let q = source_grid(n, p.alpha);
        let out = newton(n, p.kappa, p.c, &q, vec![0.0; n * n], &self.cfg)?;
        let g0 = EllipticField {
            grid_n: n,
            values: out.u.clone(),
            newton_iterations: out.iterations,
            residual: out.residual,
        }
        .qoi();
        let values = neighbors
            .iter()
            .enumerate()
            .map(|(i, theta)| {
                self.solve_near(theta, &out.u, out.factor.as_ref()).map_err(|e| Error::Stencil {
                    index: i,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((g0, values))
    }
}
