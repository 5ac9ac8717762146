//! SPARSEVA: minimize `‖θ‖₁` subject to `L(θ) ≤ L(θ̂_NR)(1 + ε_N)`, where
//! `L(θ) = ‖y − phiᵀθ‖² / (2N)`.
//!
//! The constrained program is solved through its Lagrangian `‖θ‖₁ + λ L(θ)`:
//! coordinate descent handles a fixed `λ`, and an outer bisection on `λ` finds the
//! multiplier at which the loss constraint becomes active. `L(θ(λ))` is
//! nonincreasing in `λ`, which is what makes the bisection valid.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{resolve_epsilon, RegressionProblem, SparsevaConfig, SparsevaSolution};

/// Losses below this fraction of `L(0)` are at the rounding floor of the residual.
const LOSS_FLOOR: f64 = 1e-14;
/// Inner solves run this much tighter than the outer activity tolerance.
const INNER_TOL_FACTOR: f64 = 1e-3;
/// Largest multiplier reported by [`lagrange_multiplier`].
pub const MAX_MULTIPLIER: f64 = 1e12;

/// `‖θ‖₁ + λ L(θ)` for one fixed `λ`. Note `λ` weights the loss, not the norm.
#[derive(Debug, Clone, Copy)]
pub struct LassoSubproblem<'a> {
    pub problem: &'a RegressionProblem,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct LassoFit {
    pub theta: DVector<f64>,
    pub sweeps: usize,
    /// Largest violation of the subgradient condition `0 ∈ ∂‖θ‖₁ + λ∇L(θ)`.
    pub kkt_residual: f64,
    /// Duality gap on the `‖θ‖₁ + λ L(θ)` scale.
    pub duality_gap: f64,
}

/// Non-regularized estimate `(phi phiᵀ)⁻¹ phi y`, with one step of iterative refinement.
pub fn least_squares(problem: &RegressionProblem) -> Result<DVector<f64>> {
    let chol = problem
        .gram()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Rank("normal matrix is not positive definite".into()))?;
    let mut theta = chol.solve(problem.cross());
    let correction = chol.solve(&(-gradient(problem, &theta)));
    theta += correction;
    Ok(theta)
}

pub fn loss(problem: &RegressionProblem, theta: &DVector<f64>) -> f64 {
    problem.residual(theta).norm_squared() / (2.0 * problem.n_samples() as f64)
}

/// `∇L(θ) = −phi (y − phiᵀθ) / N`.
pub fn gradient(problem: &RegressionProblem, theta: &DVector<f64>) -> DVector<f64> {
    let r = problem.residual(theta);
    (problem.phi() * r) * (-1.0 / problem.n_samples() as f64)
}

pub fn solve_lasso(sub: &LassoSubproblem<'_>, tol: f64, max_sweeps: usize) -> Result<LassoFit> {
    solve_lasso_from(sub, DVector::zeros(sub.problem.n()), tol, max_sweeps)
}

/// [`solve_lasso`] warm-started at `start`.
pub fn solve_lasso_from(
    sub: &LassoSubproblem<'_>,
    start: DVector<f64>,
    tol: f64,
    max_sweeps: usize,
) -> Result<LassoFit> {
    let lambda = sub.lambda;
    if !(lambda >= 0.0) || lambda.is_infinite() {
        return Err(Error::domain(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if start.len() != sub.problem.n() {
        return Err(Error::Dimension("warm start has the wrong length".into()));
    }
    let half_yy = sub.problem.y().norm_squared() / (2.0 * sub.problem.n_samples() as f64);
    CoordinateDescent {
        gram: sub.problem.gram(),
        cross: sub.problem.cross(),
        half_yy,
        tol,
        max_sweeps,
    }
    .run(lambda, start)
}

struct CoordinateDescent<'a> {
    gram: &'a DMatrix<f64>,
    cross: &'a DVector<f64>,
    half_yy: f64,
    tol: f64,
    max_sweeps: usize,
}

impl CoordinateDescent<'_> {
    fn run(&self, lambda: f64, mut theta: DVector<f64>) -> Result<LassoFit> {
        let n = theta.len();
        if lambda == 0.0 {
            return Ok(LassoFit {
                theta: DVector::zeros(n),
                sweeps: 0,
                kkt_residual: 0.0,
                duality_gap: 0.0,
            });
        }
        let mu = 1.0 / lambda;
        let mut grad = self.gram * &theta - self.cross;

        for sweep in 1..=self.max_sweeps {
            let mut max_step = 0.0f64;
            for j in 0..n {
                let gjj = self.gram[(j, j)];
                let old = theta[j];
                let new = soft_threshold(old - grad[j] / gjj, mu / gjj);
                if new != old {
                    theta[j] = new;
                    grad.axpy(new - old, &self.gram.column(j), 1.0);
                    max_step = max_step.max((new - old).abs());
                }
            }

            grad = self.gram * &theta - self.cross;
            let kkt = kkt_residual(&theta, &grad, lambda);
            let gap = self.scaled_gap(&theta, &grad, lambda);
            let l1 = theta.lp_norm(1);
            // Steps at rounding level mean the iterate has stalled: at large λ the
            // scaled KKT residual cannot drop below λ times the gradient rounding error.
            let stalled = max_step <= 4.0 * f64::EPSILON * theta.amax().max(1.0);
            if (kkt <= self.tol && gap <= self.tol * (1.0 + l1)) || stalled {
                return Ok(LassoFit {
                    theta,
                    sweeps: sweep,
                    kkt_residual: kkt,
                    duality_gap: gap,
                });
            }
        }
        Err(Error::Convergence {
            iterations: self.max_sweeps,
            reason: format!("coordinate descent at lambda = {lambda:e}"),
            best: Some(theta),
        })
    }

    // Gap between `L + μ‖θ‖₁` and the dual value at the rescaled residual, times λ.
    fn scaled_gap(&self, theta: &DVector<f64>, grad: &DVector<f64>, lambda: f64) -> f64 {
        let mu = 1.0 / lambda;
        let c_theta = self.cross.dot(theta);
        let theta_g_theta = theta.dot(&(grad + self.cross));
        let loss = self.half_yy - c_theta + 0.5 * theta_g_theta;
        let gmax = grad.amax();
        let s = if gmax > mu { mu / gmax } else { 1.0 };
        let primal = loss + mu * theta.lp_norm(1);
        let dual = s * (2.0 * self.half_yy - c_theta) - s * s * loss;
        (lambda * (primal - dual)).max(0.0)
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn kkt_residual(theta: &DVector<f64>, grad: &DVector<f64>, lambda: f64) -> f64 {
    theta
        .iter()
        .zip(grad.iter())
        .map(|(&t, &g)| {
            let scaled = lambda * g;
            if t > 0.0 {
                (1.0 + scaled).abs()
            } else if t < 0.0 {
                (scaled - 1.0).abs()
            } else {
                (scaled.abs() - 1.0).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Solves the SPARSEVA program.
///
/// The multiplier is bracketed starting from `λ₀ = 1/‖∇L(0)‖∞` (below which the
/// Lagrangian minimizer is zero) and doubled until the loss constraint holds, then
/// bisected until the feasible end of the bracket satisfies
/// `L(θ̂_NR)(1+ε) − tol·L(θ̂_NR) ≤ L(θ̂) ≤ L(θ̂_NR)(1+ε)`.
///
/// Two corner cases bypass the bisection: if `θ = 0` is already feasible it is the
/// minimum-norm point (`λ = 0`), and if the least-squares residual is at the rounding
/// floor the feasible set is numerically just `θ̂_NR` (`λ = ∞`).
pub fn solve_sparseva(problem: &RegressionProblem, config: &SparsevaConfig) -> Result<SparsevaSolution> {
    let n = problem.n();
    let eps = resolve_epsilon(config.eps_rule, n, problem.n_samples())?;
    let tol = config.solver_tol;
    if !(tol > 0.0) {
        return Err(Error::config("solver_tol must be positive"));
    }
    let inner_tol = tol * INNER_TOL_FACTOR;

    let theta_nr = least_squares(problem)?;
    let loss_nr = loss(problem, &theta_nr);
    let target = loss_nr * (1.0 + eps);
    let zero = DVector::zeros(n);
    let loss_zero = loss(problem, &zero);

    let finish = |theta_hat: DVector<f64>, loss_at: f64, lambda_eps: f64, iterations, active, gap| {
        Ok(SparsevaSolution {
            theta_hat,
            theta_nr: theta_nr.clone(),
            eps,
            loss_at_solution: loss_at,
            loss_nr,
            lambda_eps,
            iterations,
            constraint_active: active,
            duality_gap: gap,
        })
    };

    if loss_zero <= target {
        return finish(zero, loss_zero, 0.0, 0, false, 0.0);
    }
    let slack_tol = (tol * loss_nr).max(LOSS_FLOOR * loss_zero);
    if eps * loss_nr <= slack_tol {
        return finish(theta_nr.clone(), loss_nr, f64::INFINITY, 0, true, 0.0);
    }

    let sub = |lambda| LassoSubproblem { problem, lambda };
    let lambda0 = 1.0 / problem.cross().amax();
    let mut lo = lambda0;
    let mut hi = 2.0 * lambda0;
    let mut fit = solve_lasso(&sub(hi), inner_tol, config.max_sweeps)?;
    let mut loss_hi = loss(problem, &fit.theta);
    let mut iterations = 1;

    while loss_hi > target {
        if iterations >= config.max_iter {
            return Err(bisection_failure(iterations, "bracketing", fit.theta));
        }
        lo = hi;
        hi *= 2.0;
        fit = solve_lasso_from(&sub(hi), fit.theta, inner_tol, config.max_sweeps)?;
        loss_hi = loss(problem, &fit.theta);
        iterations += 1;
    }

    while target - loss_hi > slack_tol {
        if iterations >= config.max_iter {
            return Err(bisection_failure(iterations, "bisection", fit.theta));
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(bisection_failure(iterations, "bracket collapsed", fit.theta));
        }
        let trial = solve_lasso_from(&sub(mid), fit.theta.clone(), inner_tol, config.max_sweeps)?;
        let loss_mid = loss(problem, &trial.theta);
        iterations += 1;
        if loss_mid > target {
            lo = mid;
        } else {
            hi = mid;
            fit = trial;
            loss_hi = loss_mid;
        }
    }

    finish(fit.theta, loss_hi, hi, iterations, true, fit.duality_gap)
}

fn bisection_failure(iterations: usize, stage: &str, best: DVector<f64>) -> Error {
    Error::Convergence {
        iterations,
        reason: format!("multiplier search did not converge ({stage})"),
        best: Some(best),
    }
}

/// `λ = 1/‖∇L(θ̂)‖∞`, valid for a nonzero SPARSEVA solution.
pub fn lagrange_multiplier(problem: &RegressionProblem, solution: &SparsevaSolution) -> Result<f64> {
    if solution.theta_hat.amax() == 0.0 {
        return Err(Error::UndefinedMultiplier("the estimate is zero".into()));
    }
    let g = gradient(problem, &solution.theta_hat).amax();
    let lambda = 1.0 / g;
    if !(lambda <= MAX_MULTIPLIER) {
        return Err(Error::UndefinedMultiplier(format!(
            "gradient norm {g:e} too small; multiplier exceeds {MAX_MULTIPLIER:e}"
        )));
    }
    Ok(lambda)
}
