//! Levenberg–Marquardt with a central-difference Jacobian.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Largest cosine between the residual vector and any Jacobian column.
    pub gradient_tol: f64,
    /// Relative step length.
    pub step_tol: f64,
    /// Relative cost reduction.
    pub residual_tol: f64,
    pub damping_init: f64,
    /// Seed for the perturbed restarts.
    pub seed: u64,
    /// Number of starting points; 1 disables multi-start.
    pub starts: usize,
    /// Box constraints per parameter, applied by projection.
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iterations: 200,
            gradient_tol: 1e-8,
            step_tol: 1e-10,
            residual_tol: 1e-12,
            damping_init: 1e-3,
            seed: 0,
            starts: 1,
            bounds: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let tols = [self.gradient_tol, self.step_tol, self.residual_tol, self.damping_init];
        if self.max_iterations == 0 || tols.iter().any(|t| !(*t > 0.0)) || self.starts == 0 {
            return Err(Error::InvalidParameter(
                "fit tolerances and damping must be positive, iterations and starts nonzero".into(),
            ));
        }
        Ok(())
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(bounds);
        self
    }
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Gradient,
    Step,
    Residual,
    /// Damping grew without finding a lower cost.
    Stalled,
    MaxIterations,
}

/// Outcome of a least-squares fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// σ² (JᵀJ)⁻¹ with σ² the residual variance.
    pub covariance: Vec<Vec<f64>>,
    pub stderr: Vec<f64>,
    pub residual_rms: f64,
    /// ½ Σ r².
    pub cost: f64,
    pub n_residuals: usize,
    pub n_iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// JᵀJ was singular and a pseudo-inverse was used for the covariance.
    pub pseudo_inverse: bool,
}

impl FitResult {
    /// Rescale parameters `p_i → scale_i · p_i + offset_i` and propagate the
    /// covariance accordingly.
    pub(crate) fn rescaled(&self, scale: &[f64], offset: &[f64]) -> FitResult {
        self.reparam(|i, x| (x * scale[i] + offset[i], scale[i]))
    }

    /// Map each parameter through `map(i, x) -> (value, derivative)` and
    /// propagate the covariance to first order.
    pub(crate) fn reparam(&self, map: impl Fn(usize, f64) -> (f64, f64)) -> FitResult {
        let n = self.params.len();
        let (values, deriv): (Vec<f64>, Vec<f64>) = (0..n).map(|i| map(i, self.params[i])).unzip();
        let mut out = self.clone();
        out.params = values;
        for i in 0..n {
            out.stderr[i] = self.stderr[i] * deriv[i].abs();
            for j in 0..n {
                out.covariance[i][j] = self.covariance[i][j] * deriv[i] * deriv[j];
            }
        }
        out
    }
}

/// Minimise ½‖r(p)‖² starting from `init`.
pub fn least_squares<F>(mut residual_fn: F, init: &[f64], cfg: &FitConfig) -> Result<FitResult>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    cfg.validate()?;
    if init.is_empty() {
        return Err(Error::DegenerateInput("no parameters to fit".into()));
    }
    if let Some(b) = &cfg.bounds {
        if b.len() != init.len() || b.iter().any(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::InvalidParameter("bounds do not match the parameter vector".into()));
        }
    }

    let mut best = solve_from(&mut residual_fn, init, cfg)?;
    if cfg.starts > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 1..cfg.starts {
            let start: Vec<f64> = init
                .iter()
                .map(|&p| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    if p == 0.0 {
                        0.1 * z
                    } else {
                        p * (1.0 + 0.2 * z)
                    }
                })
                .collect();
            let start = project(&start, cfg.bounds.as_deref());
            // a restart landing somewhere non-finite is simply discarded
            if let Ok(candidate) = solve_from(&mut residual_fn, &start, cfg) {
                let better = (candidate.converged && !best.converged)
                    || (candidate.converged == best.converged && candidate.cost < best.cost);
                if better {
                    best = candidate;
                }
            }
        }
    }
    Ok(best)
}

fn project(p: &[f64], bounds: Option<&[(f64, f64)]>) -> Vec<f64> {
    match bounds {
        None => p.to_vec(),
        Some(b) => p.iter().zip(b).map(|(&x, &(lo, hi))| x.clamp(lo, hi)).collect(),
    }
}

fn all_finite(r: &[f64]) -> bool {
    r.iter().all(|v| v.is_finite())
}

fn half_sq(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// Central-difference Jacobian, column-major m × n. Steps are shrunk at the
/// bounds so every evaluation stays feasible.
///
/// A residual that jumps inside the difference step (a bistable branch
/// switching at one grid point, say) would otherwise produce an entry of
/// order jump/h. Where the forward and backward one-sided differences
/// disagree by more than rounding allows, the smaller one is used instead.
fn jacobian<F>(f: &mut F, p: &[f64], r0: &[f64], bounds: Option<&[(f64, f64)]>) -> Option<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let (m, n) = (r0.len(), p.len());
    let mut jac = DMatrix::zeros(m, n);
    let mut work = p.to_vec();
    for j in 0..n {
        let h = 1e-6 * p[j].abs().max(1.0);
        let (lo, hi) = bounds.map(|b| b[j]).unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        let up = (p[j] + h).min(hi);
        let down = (p[j] - h).max(lo);
        if up <= down {
            continue;
        }
        work[j] = up;
        let r_up = f(&work);
        work[j] = down;
        let r_down = f(&work);
        work[j] = p[j];
        if r_up.len() != m || r_down.len() != m || !all_finite(&r_up) || !all_finite(&r_down) {
            return None;
        }
        let inv = 1.0 / (up - down);
        let (h_up, h_down) = (up - p[j], p[j] - down);
        for i in 0..m {
            let central = (r_up[i] - r_down[i]) * inv;
            jac[(i, j)] = if h_up > 0.0 && h_down > 0.0 {
                let fwd = (r_up[i] - r0[i]) / h_up;
                let bwd = (r0[i] - r_down[i]) / h_down;
                if (fwd - bwd).abs() * h_up.min(h_down) > JUMP_TOL * (1.0 + r0[i].abs()) {
                    if fwd.abs() < bwd.abs() {
                        fwd
                    } else {
                        bwd
                    }
                } else {
                    central
                }
            } else {
                central
            };
        }
    }
    Some(jac)
}

/// Second difference of a residual above which the residual is taken to be
/// discontinuous within the difference step.
const JUMP_TOL: f64 = 1e-7;

fn solve_from<F>(f: &mut F, init: &[f64], cfg: &FitConfig) -> Result<FitResult>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let bounds = cfg.bounds.as_deref();
    let n = init.len();
    let mut p = project(init, bounds);
    let mut r = f(&p);
    let m = r.len();
    if m == 0 {
        return Err(Error::DegenerateInput("residual vector is empty".into()));
    }
    if !all_finite(&r) {
        return Err(Error::NonFinite { iteration: 0, last_good: p });
    }
    let mut cost = half_sq(&r);
    let mut lambda = cfg.damping_init;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    'outer: while iterations < cfg.max_iterations {
        iterations += 1;
        let jac = jacobian(f, &p, &r, bounds)
            .ok_or_else(|| Error::NonFinite { iteration: iterations, last_good: p.clone() })?;
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.tr_mul(&jac);
        let grad = jac.tr_mul(&rv);

        let r_norm = (2.0 * cost).sqrt();
        if r_norm == 0.0 {
            termination = Termination::Residual;
            break;
        }
        let cosine = (0..n)
            .filter(|&j| jtj[(j, j)] > 0.0 && !at_bound_pushing_out(&p, &grad, bounds, j))
            .map(|j| grad[j].abs() / (jtj[(j, j)].sqrt() * r_norm))
            .fold(0.0, f64::max);
        if cosine <= cfg.gradient_tol {
            termination = Termination::Gradient;
            break;
        }

        let diag: Vec<f64> = (0..n).map(|j| jtj[(j, j)].max(1e-300)).collect();
        loop {
            let mut a = jtj.clone();
            for j in 0..n {
                a[(j, j)] += lambda * diag[j];
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lambda *= 10.0;
                    if lambda > 1e16 {
                        termination = Termination::Stalled;
                        break 'outer;
                    }
                    continue;
                }
            };
            let trial = project(&p.iter().zip(step.iter()).map(|(a, b)| a + b).collect::<Vec<_>>(), bounds);
            let r_trial = f(&trial);
            let cost_trial = if r_trial.len() == m && all_finite(&r_trial) { half_sq(&r_trial) } else { f64::INFINITY };
            if cost_trial < cost {
                let actual = p.iter().zip(&trial).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                let p_norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                let reduction = (cost - cost_trial) / cost;
                p = trial;
                r = r_trial;
                cost = cost_trial;
                lambda = (lambda / 10.0).max(1e-12);
                if actual <= cfg.step_tol * (p_norm + cfg.step_tol) {
                    termination = Termination::Step;
                    break 'outer;
                }
                if reduction <= cfg.residual_tol {
                    termination = Termination::Residual;
                    break 'outer;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                termination = Termination::Stalled;
                break 'outer;
            }
        }
    }

    let jac = jacobian(f, &p, &r, bounds).ok_or_else(|| Error::NonFinite { iteration: iterations, last_good: p.clone() })?;
    let dof = m.saturating_sub(n).max(1) as f64;
    let variance = 2.0 * cost / dof;
    let (covariance, pseudo_inverse) = covariance(&jac.tr_mul(&jac), variance);
    let stderr = (0..n).map(|i| covariance[i][i].max(0.0).sqrt()).collect();
    let converged = match termination {
        Termination::Gradient | Termination::Step | Termination::Residual => true,
        Termination::Stalled => true,
        Termination::MaxIterations => false,
    };
    Ok(FitResult {
        params: p,
        covariance,
        stderr,
        residual_rms: (2.0 * cost / m as f64).sqrt(),
        cost,
        n_residuals: m,
        n_iterations: iterations,
        converged,
        termination,
        pseudo_inverse,
    })
}

/// A parameter sitting on a bound whose gradient pushes it further out does
/// not count against the gradient test.
fn at_bound_pushing_out(p: &[f64], grad: &DVector<f64>, bounds: Option<&[(f64, f64)]>, j: usize) -> bool {
    match bounds {
        Some(b) => (p[j] <= b[j].0 && grad[j] > 0.0) || (p[j] >= b[j].1 && grad[j] < 0.0),
        None => false,
    }
}

/// σ²·(JᵀJ)⁻¹ via a symmetric eigendecomposition; eigenvalues below a
/// relative threshold are dropped (pseudo-inverse).
fn covariance(jtj: &DMatrix<f64>, variance: f64) -> (Vec<Vec<f64>>, bool) {
    let n = jtj.nrows();
    // equilibrate so the threshold is scale free
    let d: Vec<f64> = (0..n).map(|i| if jtj[(i, i)] > 0.0 { 1.0 / jtj[(i, i)].sqrt() } else { 0.0 }).collect();
    let mut scaled = jtj.clone();
    for i in 0..n {
        for j in 0..n {
            scaled[(i, j)] *= d[i] * d[j];
        }
    }
    let eig = SymmetricEigen::new(scaled);
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let threshold = max_ev * 1e-13;
    let mut pseudo = d.iter().any(|&x| x == 0.0);
    let mut inv = DMatrix::zeros(n, n);
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > threshold {
            let v = eig.eigenvectors.column(k);
            inv += (v * v.transpose()) / ev;
        } else {
            pseudo = true;
        }
    }
    let cov = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (inv[(i, j)] + inv[(j, i)]) * d[i] * d[j] * variance).collect())
        .collect();
    (cov, pseudo)
}
