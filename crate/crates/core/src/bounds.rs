//! Estimation-error bounds for SPARSEVA.
//!
//! [`general_bound`] is the two-case bound for any decomposable regularizer, stated
//! in terms of abstract geometric constants. [`sparse_bound`] is its closed-form
//! instantiation for the ℓ₁ norm with Gaussian regressors and noise, where the
//! gradient norms are replaced by their χ²-based high-probability bounds.
//! Every bound here is on the *squared* ℓ₂ error.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::stats::{chi2_upper_quantile, ChiSquareQuantileQuery};

/// ℓ∞ norm, the dual of ℓ₁.
pub fn dual_norm_linf(v: &DVector<f64>) -> f64 {
    v.amax()
}

/// A coordinate support `S ⊆ {0..n}` (zero-based) defining `M(S)` and its
/// orthogonal complement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubspaceSupport {
    indices: Vec<usize>,
    n: usize,
}

impl SubspaceSupport {
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.is_empty() {
            return Err(Error::domain("support must be nonempty"));
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::domain("support indices must be unique"));
        }
        if indices.last().is_some_and(|&last| last >= n) {
            return Err(Error::domain(format!("support index out of range for dimension {n}")));
        }
        Ok(Self { indices, n })
    }

    /// The indices of the `n_eta` largest-magnitude entries of `theta`
    /// (ties broken by lower index).
    pub fn top_magnitudes(theta: &DVector<f64>, n_eta: usize) -> Result<Self> {
        let n = theta.len();
        if n_eta == 0 || n_eta > n {
            return Err(Error::domain(format!("n_eta = {n_eta} outside [1, {n}]")));
        }
        Self::new(magnitude_order(theta)[..n_eta].to_vec(), n)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Cardinality of the complement `Sᶜ`.
    pub fn complement_len(&self) -> usize {
        self.n - self.indices.len()
    }
}

fn magnitude_order(theta: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..theta.len()).collect();
    order.sort_by(|&a, &b| theta[b].abs().total_cmp(&theta[a].abs()).then(a.cmp(&b)));
    order
}

/// Euclidean projection onto `M(S)`: zero every coordinate outside `S`.
pub fn project_onto_support(v: &DVector<f64>, s: &SubspaceSupport) -> DVector<f64> {
    DVector::from_fn(v.len(), |i, _| if s.contains(i) { v[i] } else { 0.0 })
}

/// Euclidean projection onto `M⊥(S)`.
pub fn project_onto_complement(v: &DVector<f64>, s: &SubspaceSupport) -> DVector<f64> {
    DVector::from_fn(v.len(), |i, _| if s.contains(i) { 0.0 } else { v[i] })
}

/// `Ψ(M(S)) = sup ‖u‖₁/‖u‖₂ over M(S) = √|S|`.
pub fn subspace_compatibility(s: &SubspaceSupport) -> f64 {
    (s.len() as f64).sqrt()
}

/// Scalars entering the general two-case bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralBoundInputs {
    /// Curvature `κ_L` of the loss.
    pub kappa_l: f64,
    pub lambda_eps: f64,
    /// Dual norm of the gradient at the truth, `R*(∇L(θ*))`.
    pub r_star_grad: f64,
    /// `Ψ(M̄)`.
    pub psi_m: f64,
    /// `Ψ(M̄⊥)`.
    pub psi_m_perp: f64,
    /// `R(θ*_{M⊥})`.
    pub r_theta_perp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundCase {
    /// `λ ≤ 1/R*(∇L(θ*))`.
    SmallMultiplier,
    /// `λ > 1/R*(∇L(θ*))`.
    LargeMultiplier,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralBound {
    pub value: f64,
    pub case: BoundCase,
}

pub fn general_bound(input: &GeneralBoundInputs) -> Result<GeneralBound> {
    let GeneralBoundInputs {
        kappa_l: kappa,
        lambda_eps: lambda,
        r_star_grad: r_star,
        psi_m,
        psi_m_perp,
        r_theta_perp,
    } = *input;
    if !(kappa > 0.0 && lambda > 0.0) {
        return Err(Error::domain("curvature and multiplier must be positive"));
    }
    if [r_star, psi_m, psi_m_perp, r_theta_perp].iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::domain("bound inputs must be nonnegative"));
    }

    let tail = 4.0 / (kappa * lambda) * r_theta_perp;
    // λ·R* ≤ 1 also covers R* = 0 (threshold at infinity).
    if lambda * r_star <= 1.0 {
        Ok(GeneralBound {
            value: 4.0 / (kappa * kappa * lambda * lambda) * psi_m * psi_m + tail,
            case: BoundCase::SmallMultiplier,
        })
    } else {
        let r2 = r_star * r_star;
        Ok(GeneralBound {
            value: 2.0 / (kappa * kappa) * r2 * psi_m * psi_m
                + 8.0 / (kappa * kappa) * r2 * psi_m_perp * psi_m_perp
                + tail,
            case: BoundCase::LargeMultiplier,
        })
    }
}

fn check_noise_inputs(n_samples: u64, n: u64, sigma_e2: f64, s_max: f64) -> Result<()> {
    if n == 0 || n_samples == 0 {
        return Err(Error::domain("n and N must be positive"));
    }
    if !(sigma_e2 >= 0.0) || !(s_max > 0.0) {
        return Err(Error::domain("need sigma_e2 >= 0 and s_max > 0"));
    }
    Ok(())
}

fn upper_quantile(beta: f64, dof: u64) -> Result<f64> {
    chi2_upper_quantile(ChiSquareQuantileQuery::new(beta, dof)?)
}

/// High-probability bound on `‖∇L(θ*)‖∞`:
/// `√(2 σ_e² s_max χ²_β(N) ln(2/β)) / N`, holding with probability `≥ 1 − 2nβ`.
pub fn grad_bound_at_theta_star(n_samples: u64, n: u64, sigma_e2: f64, s_max: f64, beta: f64) -> Result<f64> {
    check_noise_inputs(n_samples, n, sigma_e2, s_max)?;
    let chi = upper_quantile(beta, n_samples)?;
    Ok((2.0 * sigma_e2 * s_max * chi * (2.0 / beta).ln()).sqrt() / n_samples as f64)
}

/// High-probability bound on `‖∇L(θ̂_ε)‖∞`:
/// `√(2 σ_e² s_max χ²_β(N−n)(1+ε) ln(2/β)) / N`.
pub fn grad_bound_at_theta_hat(
    n_samples: u64,
    n: u64,
    sigma_e2: f64,
    s_max: f64,
    beta: f64,
    eps: f64,
) -> Result<f64> {
    check_noise_inputs(n_samples, n, sigma_e2, s_max)?;
    if n_samples <= n {
        return Err(Error::domain(format!("need N > n, got N = {n_samples}, n = {n}")));
    }
    if !(eps >= 0.0) {
        return Err(Error::domain("epsilon must be >= 0"));
    }
    let chi = upper_quantile(beta, n_samples - n)?;
    Ok((2.0 * sigma_e2 * s_max * chi * (1.0 + eps) * (2.0 / beta).ln()).sqrt() / n_samples as f64)
}

/// Scalars entering the sparse-regression bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseBoundInputs {
    pub n: u64,
    pub n_eta: u64,
    pub n_samples: u64,
    pub sigma_e2: f64,
    /// Largest diagonal entry of the regressor covariance.
    pub s_max: f64,
    pub kappa_alpha: f64,
    pub eps: f64,
    pub beta: f64,
    pub alpha: f64,
    /// `‖θ*_{[n_η+1:n]}‖₁`, the ℓ₁ mass outside the `n_η` largest entries.
    pub theta_tail_l1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundResult {
    pub a1: f64,
    pub a2: f64,
    /// `max(a1, a2)`, bounding `‖θ̂ − θ*‖₂²`.
    pub bound: f64,
    /// Nominal probability `(1 − α)(1 − 4nβ)` that the bound holds.
    pub prob: f64,
    /// Set when `prob ≤ 0`, i.e. the statement carries no information.
    pub vacuous: bool,
}

pub fn sparse_bound(input: &SparseBoundInputs) -> Result<BoundResult> {
    let SparseBoundInputs {
        n,
        n_eta,
        n_samples,
        sigma_e2,
        s_max,
        kappa_alpha,
        eps,
        beta,
        alpha,
        theta_tail_l1,
    } = *input;
    check_noise_inputs(n_samples, n, sigma_e2, s_max)?;
    if n_samples <= n {
        return Err(Error::domain(format!("need N > n, got N = {n_samples}, n = {n}")));
    }
    if n_eta == 0 || n_eta > n {
        return Err(Error::domain(format!("n_eta = {n_eta} outside [1, {n}]")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha = {alpha} outside (0, 1)")));
    }
    if !(kappa_alpha > 0.0) || !(eps >= 0.0) || !(theta_tail_l1 >= 0.0) {
        return Err(Error::domain("need kappa_alpha > 0, eps >= 0, tail >= 0"));
    }

    let chi_full = upper_quantile(beta, n_samples)?;
    let chi_resid = upper_quantile(beta, n_samples - n)?;
    let log_term = (2.0 / beta).ln();
    let big_n = n_samples as f64;
    let (n_f, n_eta_f) = (n as f64, n_eta as f64);

    let hat_energy = sigma_e2 * s_max * chi_resid * (1.0 + eps) * log_term;
    let star_energy = sigma_e2 * s_max * chi_full * log_term;
    let k2n2 = kappa_alpha * kappa_alpha * big_n * big_n;
    let tail_term = (32.0 * hat_energy).sqrt() / (kappa_alpha * big_n) * theta_tail_l1;

    let a1 = 8.0 * n_eta_f * hat_energy / k2n2 + tail_term;
    let a2 = (16.0 * n_f - 12.0 * n_eta_f) * star_energy / k2n2 + tail_term;
    let prob = (1.0 - alpha) * (1.0 - 4.0 * n_f * beta);
    Ok(BoundResult {
        a1,
        a2,
        bound: a1.max(a2),
        prob,
        vacuous: prob <= 0.0,
    })
}

/// `‖θ*_{[n_η+1:n]}‖₁`: sum of the `n − n_η` smallest magnitudes.
pub fn weak_sparsity_tail(theta_star: &DVector<f64>, n_eta: usize) -> Result<f64> {
    let n = theta_star.len();
    if n_eta == 0 {
        return Err(Error::domain("n_eta must be >= 1"));
    }
    if n_eta >= n {
        return Ok(0.0);
    }
    let order = magnitude_order(theta_star);
    // Accumulate from the smallest entry up.
    Ok(order[n_eta..].iter().rev().map(|&i| theta_star[i].abs()).sum())
}

/// `n_η^{1−1/q} R_q^{1/q}`, bounding the tail for any `θ* ∈ B_q(R_q)`, `q ∈ (0, 1]`.
pub fn weak_sparsity_tail_bound(q: f64, r_q: f64, n_eta: usize) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::domain(format!("analytic tail bound needs q in (0, 1], got {q}")));
    }
    if n_eta == 0 || !(r_q >= 0.0) {
        return Err(Error::domain("need n_eta >= 1 and R_q >= 0"));
    }
    Ok((n_eta as f64).powf(1.0 - 1.0 / q) * r_q.powf(1.0 / q))
}
