//! Entropy-balancing weights via the convex dual.
//!
//! For base weights `v` and features `g_i`, the weights minimizing
//! `sum w_i log(w_i / v_i)` subject to `sum w_i g_i = 0`, `sum w_i = 1` are the
//! exponential tilt
//!
//! ```text
//! w_i(gamma) = v_i exp(-gamma' g_i) / sum_j v_j exp(-gamma' g_j)
//! ```
//!
//! at the minimizer of `log sum_i v_i exp(-gamma' g_i)`. The gradient of that
//! objective is `-sum w_i(gamma) g_i` and its Hessian is the weighted covariance
//! of the feature rows, so a damped Newton method converges quadratically.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::BalanceProblem;
use crate::error::{Error, Result};

const ARMIJO_SLOPE: f64 = 1e-4;
const RIDGE_START: f64 = 1e-10;
const RIDGE_MAX: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop once the sup-norm of the dual gradient falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Backtracking factor applied to the step length on each Armijo failure.
    pub line_search_shrink: f64,
    /// Ridge added to the Hessian before the first factorization attempt.
    pub hessian_ridge: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 200,
            line_search_shrink: 0.5,
            hessian_ridge: 0.0,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig(
                "solver tolerance must be positive".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.line_search_shrink > 0.0 && self.line_search_shrink < 1.0) {
            return Err(Error::InvalidConfig(
                "line_search_shrink must lie in (0, 1)".into(),
            ));
        }
        if !(self.hessian_ridge >= 0.0) {
            return Err(Error::InvalidConfig(
                "hessian_ridge must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSolution {
    pub weights: DVector<f64>,
    pub gamma: DVector<f64>,
    /// Dual objective at `gamma`.
    pub objective: f64,
    /// Sup-norm of `sum w_i g_i`.
    pub constraint_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Dual objective after every accepted step, starting at `gamma = 0`.
    #[serde(skip)]
    pub objective_history: Vec<f64>,
}

/// Log-scores `log v_i - gamma' g_i` and their maximum.
fn log_scores(gamma: &DVector<f64>, problem: &BalanceProblem) -> (DVector<f64>, f64) {
    let mut s = -(problem.features() * gamma);
    for (si, vi) in s.iter_mut().zip(problem.base_weights().iter()) {
        *si += vi.ln();
    }
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (s, max)
}

/// `log sum_i v_i exp(-gamma' g_i)`, evaluated with a max shift.
pub fn dual_objective(gamma: &DVector<f64>, problem: &BalanceProblem) -> f64 {
    let (s, max) = log_scores(gamma, problem);
    max + s.iter().map(|si| (si - max).exp()).sum::<f64>().ln()
}

/// Normalized exponential-tilt weights at `gamma`.
pub fn tilted_weights(gamma: &DVector<f64>, problem: &BalanceProblem) -> DVector<f64> {
    let (s, max) = log_scores(gamma, problem);
    let mut w = s.map(|si| (si - max).exp());
    let total = w.sum();
    w /= total;
    w
}

pub fn dual_gradient(gamma: &DVector<f64>, problem: &BalanceProblem) -> DVector<f64> {
    let w = tilted_weights(gamma, problem);
    -(problem.features().tr_mul(&w))
}

/// Weighted covariance of the feature rows under `w(gamma)`.
pub fn dual_hessian(gamma: &DVector<f64>, problem: &BalanceProblem) -> DMatrix<f64> {
    let w = tilted_weights(gamma, problem);
    weighted_covariance(problem.features(), &w)
}

fn weighted_covariance(g: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mean = g.tr_mul(w);
    let mut scaled = g.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= w[i];
    }
    let mut h = g.tr_mul(&scaled);
    h -= &mean * mean.transpose();
    // exact symmetry; the two triangles can differ in the last bit
    let ht = h.transpose();
    (h + ht) * 0.5
}

/// Solves `(H + ridge I) step = -grad`, escalating the ridge on failure.
fn newton_direction(
    h: &DMatrix<f64>,
    grad: &DVector<f64>,
    base_ridge: f64,
) -> Result<DVector<f64>> {
    let d = h.nrows();
    let mut ridge = base_ridge;
    loop {
        let mut shifted = h.clone();
        for k in 0..d {
            shifted[(k, k)] += ridge;
        }
        if let Some(chol) = shifted.cholesky() {
            let step = chol.solve(&(-grad));
            if step.iter().all(|v| v.is_finite()) {
                return Ok(step);
            }
        }
        ridge = if ridge < RIDGE_START {
            RIDGE_START
        } else {
            ridge * 10.0
        };
        if ridge > RIDGE_MAX * (1.0 + 1e-9) {
            return Err(Error::SingularHessian {
                ridge: ridge / 10.0,
            });
        }
    }
}

/// Damped Newton on the dual starting from `gamma = 0`.
pub fn solve_weights(problem: &BalanceProblem, config: &SolverConfig) -> Result<WeightSolution> {
    config.validate()?;
    let d = problem.dim();
    let mut gamma = DVector::zeros(d);
    let mut objective = dual_objective(&gamma, problem);
    let mut history = vec![objective];
    let mut iterations = 0;

    loop {
        let w = tilted_weights(&gamma, problem);
        let moments = problem.features().tr_mul(&w);
        let residual = moments.amax();
        if residual < config.tolerance {
            return Ok(WeightSolution {
                weights: w,
                gamma,
                objective,
                constraint_residual: residual,
                iterations,
                converged: true,
                objective_history: history,
            });
        }
        if iterations >= config.max_iterations {
            return Err(Error::NotConverged {
                iterations,
                residual,
            });
        }
        iterations += 1;

        let grad = -moments;
        let hessian = weighted_covariance(problem.features(), &w);
        let step = newton_direction(&hessian, &grad, config.hessian_ridge)?;
        let slope = grad.dot(&step);
        if !(slope < 0.0) {
            return Err(Error::NotConverged {
                iterations,
                residual,
            });
        }

        // Once the predicted decrease is below what f64 can resolve in the
        // objective, the full Newton step is taken without the Armijo check.
        let resolvable = -slope > 1e-13 * objective.abs().max(1.0);
        let mut t = 1.0;
        loop {
            let candidate = &gamma + &step * t;
            let value = dual_objective(&candidate, problem);
            let accept = if resolvable {
                value <= objective + ARMIJO_SLOPE * t * slope
            } else {
                value <= objective + 1e-15 * objective.abs().max(1.0)
            };
            if accept && value.is_finite() {
                gamma = candidate;
                objective = value.min(objective);
                history.push(objective);
                break;
            }
            t *= config.line_search_shrink;
            if t < MIN_STEP {
                return Err(Error::NotConverged {
                    iterations,
                    residual,
                });
            }
        }
    }
}
