//! Regression data, ground truth and SPARSEVA configuration.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative eigenvalue floor used for the persistent-excitation check.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// A linear regression `y = phiᵀ θ + e` with `phi` stored as `n × N`
/// (one regressor per column).
///
/// The normalized Gram matrix `phi phiᵀ / N` and cross term `phi y / N` are
/// computed once at construction, where the Gram matrix is also checked for
/// positive definiteness.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    phi: DMatrix<f64>,
    y: DVector<f64>,
    gram: DMatrix<f64>,
    cross: DVector<f64>,
}

impl RegressionProblem {
    pub fn new(phi: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let (n, n_samples) = phi.shape();
        if n == 0 || n_samples == 0 {
            return Err(Error::Dimension("empty regressor matrix".into()));
        }
        if y.len() != n_samples {
            return Err(Error::Dimension(format!(
                "phi has {n_samples} columns but y has {} entries",
                y.len()
            )));
        }
        if n_samples < n {
            return Err(Error::Rank(format!(
                "{n_samples} samples cannot identify {n} parameters"
            )));
        }
        if phi.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::domain("regression data contains non-finite values"));
        }

        let inv_n = 1.0 / n_samples as f64;
        let gram = (&phi * phi.transpose()) * inv_n;
        let gram = (&gram + gram.transpose()) * 0.5;
        let cross = (&phi * &y) * inv_n;

        let eig = gram.clone().symmetric_eigenvalues();
        let max = eig.max();
        let min = eig.min();
        if !(max > 0.0) || min <= RANK_TOLERANCE * max {
            return Err(Error::Rank(format!(
                "phi phi^T is not positive definite (eigenvalues in [{min:e}, {max:e}])"
            )));
        }

        Ok(Self {
            phi,
            y,
            gram,
            cross,
        })
    }

    /// Builds a problem from regression rows `(y_j, φ_j)`.
    pub fn from_rows(y: Vec<f64>, regressors: &[Vec<f64>]) -> Result<Self> {
        let n_samples = y.len();
        let n = regressors.first().map_or(0, Vec::len);
        if regressors.len() != n_samples {
            return Err(Error::Dimension(format!(
                "{} regressor rows for {n_samples} outputs",
                regressors.len()
            )));
        }
        if let Some(bad) = regressors.iter().position(|r| r.len() != n) {
            return Err(Error::Dimension(format!(
                "regressor row {bad} has {} entries, expected {n}",
                regressors[bad].len()
            )));
        }
        let phi = DMatrix::from_fn(n, n_samples, |i, j| regressors[j][i]);
        Self::new(phi, DVector::from_vec(y))
    }

    /// Number of parameters `n`.
    pub fn n(&self) -> usize {
        self.phi.nrows()
    }

    /// Number of samples `N`.
    pub fn n_samples(&self) -> usize {
        self.phi.ncols()
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// `phi phiᵀ / N`, the Hessian of the quadratic loss.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `phi y / N`.
    pub fn cross(&self) -> &DVector<f64> {
        &self.cross
    }

    /// Residual `y − phiᵀ θ`.
    pub fn residual(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.y - self.phi.tr_mul(theta)
    }
}

/// The data-generating parameter vector and its noise and sparsity metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueModel {
    pub theta_star: DVector<f64>,
    pub sigma_e2: f64,
    /// Weak-sparsity exponent in `[0, 1]`; `0` means exact sparsity.
    pub q: f64,
    pub r_q: f64,
}

impl TrueModel {
    pub fn new(theta_star: DVector<f64>, sigma_e2: f64, q: f64, r_q: f64) -> Result<Self> {
        if !(sigma_e2 >= 0.0) || !sigma_e2.is_finite() {
            return Err(Error::domain(format!("noise variance {sigma_e2} must be finite and >= 0")));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::domain(format!("q = {q} outside [0, 1]")));
        }
        let measure = lq_measure(theta_star.as_slice(), q);
        if measure > r_q * (1.0 + 1e-12) {
            return Err(Error::domain(format!(
                "theta* is not in the l_q ball: measure {measure} exceeds R_q = {r_q}"
            )));
        }
        Ok(Self {
            theta_star,
            sigma_e2,
            q,
            r_q,
        })
    }

    /// Ground truth with `(q, R_q)` set to the tightest radius at the given exponent.
    pub fn with_fitted_radius(theta_star: DVector<f64>, sigma_e2: f64, q: f64) -> Result<Self> {
        let r_q = lq_measure(theta_star.as_slice(), q);
        Self::new(theta_star, sigma_e2, q, r_q)
    }

    pub fn n(&self) -> usize {
        self.theta_star.len()
    }
}

/// `Σ |θ_i|^q`, with `q = 0` counting nonzeros (`0⁰ = 0`).
pub fn lq_measure(theta: &[f64], q: f64) -> f64 {
    if q == 0.0 {
        theta.iter().filter(|v| **v != 0.0).count() as f64
    } else {
        theta.iter().map(|v| v.abs().powf(q)).sum()
    }
}

/// Rule for the SPARSEVA slack `ε_N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EpsilonRule {
    /// Prediction error criterion, `n / N`.
    Pec,
    /// Akaike, `2n / N`.
    Aic,
    /// Bayesian, `n ln(N) / N` (natural log).
    Bic,
    Explicit(f64),
}

impl EpsilonRule {
    pub const STANDARD: [EpsilonRule; 3] = [EpsilonRule::Pec, EpsilonRule::Aic, EpsilonRule::Bic];
}

impl fmt::Display for EpsilonRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsilonRule::Pec => f.write_str("pec"),
            EpsilonRule::Aic => f.write_str("aic"),
            EpsilonRule::Bic => f.write_str("bic"),
            EpsilonRule::Explicit(v) => write!(f, "explicit:{v}"),
        }
    }
}

impl FromStr for EpsilonRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "pec" => Ok(EpsilonRule::Pec),
            "aic" => Ok(EpsilonRule::Aic),
            "bic" => Ok(EpsilonRule::Bic),
            other => {
                let value = other.strip_prefix("explicit:").unwrap_or(other);
                value
                    .parse::<f64>()
                    .map(EpsilonRule::Explicit)
                    .map_err(|_| Error::config(format!("unknown epsilon rule `{s}`")))
            }
        }
    }
}

impl TryFrom<String> for EpsilonRule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EpsilonRule> for String {
    fn from(rule: EpsilonRule) -> String {
        rule.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsevaConfig {
    pub eps_rule: EpsilonRule,
    /// Coordinate-descent KKT / duality-gap tolerance and relative constraint-activity tolerance.
    pub solver_tol: f64,
    /// Cap on outer bisection steps on the multiplier.
    pub max_iter: usize,
    /// Cap on coordinate-descent sweeps per inner solve.
    pub max_sweeps: usize,
}

impl Default for SparsevaConfig {
    fn default() -> Self {
        Self {
            eps_rule: EpsilonRule::Pec,
            solver_tol: 1e-8,
            max_iter: 300,
            max_sweeps: 100_000,
        }
    }
}

impl SparsevaConfig {
    pub fn with_rule(eps_rule: EpsilonRule) -> Self {
        Self {
            eps_rule,
            ..Self::default()
        }
    }
}

/// Resolves the rule to a numeric `ε_N` for `n` parameters and `N` samples.
pub fn resolve_epsilon(rule: EpsilonRule, n: usize, n_samples: usize) -> Result<f64> {
    if n == 0 || n_samples == 0 {
        return Err(Error::config("n and N must be positive"));
    }
    let (n, big_n) = (n as f64, n_samples as f64);
    let eps = match rule {
        EpsilonRule::Pec => n / big_n,
        EpsilonRule::Aic => 2.0 * n / big_n,
        EpsilonRule::Bic => n * big_n.ln() / big_n,
        EpsilonRule::Explicit(v) => v,
    };
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::config(format!("epsilon must be positive and finite, got {eps}")));
    }
    Ok(eps)
}

/// Output of [`crate::solver::solve_sparseva`].
#[derive(Debug, Clone)]
pub struct SparsevaSolution {
    pub theta_hat: DVector<f64>,
    pub theta_nr: DVector<f64>,
    pub eps: f64,
    pub loss_at_solution: f64,
    pub loss_nr: f64,
    /// Terminal multiplier of the bisection. `0` for the zero estimate, `+∞` when the
    /// least-squares fit is exact and the feasible set collapses to it.
    pub lambda_eps: f64,
    pub iterations: usize,
    pub constraint_active: bool,
    /// Duality gap of the final inner Lagrangian solve, on the `‖θ‖₁ + λ L(θ)` scale.
    pub duality_gap: f64,
}

impl SparsevaSolution {
    /// True when `‖θ̂‖∞` is below `tol`.
    pub fn is_zero(&self, tol: f64) -> bool {
        self.theta_hat.amax() < tol
    }
}
