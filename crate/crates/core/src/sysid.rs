//! Synthetic FIR identification data: random stable systems, white or AR(1)
//! inputs, SNR-calibrated output noise and the FIR regression matrix.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{RegressionProblem, TrueModel};
use crate::stats::{fill_standard_normal, stream_rng};

pub const MAX_POLE_RADIUS: f64 = 0.9;
pub const MAX_ORDER: usize = 10;
/// Impulse-response length over which the gain is normalized.
pub const NORM_HORIZON: usize = 200;
/// Samples discarded before the first regression row, beyond the `n − 1` the
/// regressor needs.
pub const EXTRA_WARMUP: usize = 50;
/// AR(1) input `u(t) = AR1_POLE·u(t−1) + AR1_GAIN·w(t)`, unit stationary variance.
pub const AR1_POLE: f64 = 0.2;
pub const AR1_GAIN: f64 = 0.9798;
/// Exponent of the weak-sparsity diagnostics attached to synthesized truths.
pub const FITTED_Q: f64 = 0.5;

/// `gain · B(q⁻¹) / A(q⁻¹)` with `B = Π(1 − z_i q⁻¹)`, `A = Π(1 − p_i q⁻¹)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSystem {
    pub poles: Vec<Complex<f64>>,
    pub zeros: Vec<Complex<f64>>,
    pub gain: f64,
    pub order: usize,
}

/// `count` roots with magnitude below `radius`: real roots and conjugate pairs.
fn random_roots<R: Rng>(rng: &mut R, count: usize, radius: f64) -> Vec<Complex<f64>> {
    let mut roots = Vec::with_capacity(count);
    while roots.len() < count {
        let r = rng.random_range(0.0..radius);
        if count - roots.len() >= 2 && rng.random_bool(0.5) {
            let angle = rng.random_range(0.0..std::f64::consts::PI);
            let z = Complex::from_polar(r, angle);
            roots.push(z);
            roots.push(z.conj());
        } else {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            roots.push(Complex::new(sign * r, 0.0));
        }
    }
    roots
}

/// Real coefficients of `Π(1 − r_i x)`, lowest degree first.
fn expand(roots: &[Complex<f64>]) -> Vec<f64> {
    let mut coeffs = vec![Complex::new(1.0, 0.0)];
    for &r in roots {
        let mut next = coeffs.clone();
        next.push(Complex::new(0.0, 0.0));
        for (k, c) in coeffs.iter().enumerate() {
            next[k + 1] -= r * c;
        }
        coeffs = next;
    }
    coeffs.into_iter().map(|c| c.re).collect()
}

pub fn random_stable_system(seed: u64) -> RandomSystem {
    let mut rng = stream_rng(seed, 0);
    let order = rng.random_range(1..=MAX_ORDER);
    let poles = random_roots(&mut rng, order, MAX_POLE_RADIUS);
    let n_zeros = rng.random_range(0..=order);
    let zeros = random_roots(&mut rng, n_zeros, 1.0);
    let target_norm = rng.random_range(0.5..2.0);

    let mut sys = RandomSystem {
        poles,
        zeros,
        gain: 1.0,
        order,
    };
    let raw = impulse_response(&sys, NORM_HORIZON);
    sys.gain = target_norm / raw.norm();
    sys
}

/// First `len` impulse-response coefficients, `h(0) = gain`, by long division.
pub fn impulse_response(sys: &RandomSystem, len: usize) -> DVector<f64> {
    let b = expand(&sys.zeros);
    let a = expand(&sys.poles);
    let mut h = DVector::zeros(len);
    for k in 0..len {
        let mut v = sys.gain * b.get(k).copied().unwrap_or(0.0);
        for i in 1..a.len().min(k + 1) {
            v -= a[i] * h[k - i];
        }
        h[k] = v;
    }
    h
}

/// The truth used for data generation: the first `n` impulse-response coefficients.
pub fn fir_truth(sys: &RandomSystem, n: usize) -> DVector<f64> {
    impulse_response(sys, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InputKind {
    #[serde(rename = "white")]
    White,
    #[serde(rename = "ar1")]
    Ar1Filtered,
}

impl InputKind {
    pub const ALL: [InputKind; 2] = [InputKind::White, InputKind::Ar1Filtered];

    /// Spacing between consecutive regression rows: `n` for the AR(1) input so the
    /// regressor columns are nearly independent, `1` otherwise.
    pub fn stride(self, n: usize) -> usize {
        match self {
            InputKind::White => 1,
            InputKind::Ar1Filtered => n,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            InputKind::White => "white",
            InputKind::Ar1Filtered => "ar1",
        }
    }
}

impl fmt::Display for InputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for InputKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "white" => Ok(InputKind::White),
            "ar1" | "ar1filtered" | "ar1_filtered" => Ok(InputKind::Ar1Filtered),
            other => Err(Error::config(format!("unknown input kind '{other}' (expected white or ar1)"))),
        }
    }
}

/// One realization's signal parameters. `snr_db = ∞` means noiseless output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalSpec {
    pub input_kind: InputKind,
    /// Number of regression rows `N`.
    pub n_rows: usize,
    pub snr_db: f64,
    pub seed: u64,
}

impl SignalSpec {
    /// Raw samples needed for `n_rows` rows at FIR order `n`.
    pub fn n_total(&self, n: usize) -> usize {
        first_row(n) + (self.n_rows.saturating_sub(1)) * self.input_kind.stride(n) + 1
    }
}

/// Time index of the first regression row.
pub fn first_row(n: usize) -> usize {
    n + EXTRA_WARMUP
}

/// Regressor covariance `Σ` of the regression columns.
pub fn sigma_for(kind: InputKind, n: usize) -> DMatrix<f64> {
    match kind {
        InputKind::White => DMatrix::identity(n, n),
        InputKind::Ar1Filtered => DMatrix::from_fn(n, n, |i, j| AR1_POLE.powi(i.abs_diff(j) as i32)),
    }
}

/// Largest diagonal entry of `Σ`.
pub fn s_max(sigma: &DMatrix<f64>) -> f64 {
    sigma.diagonal().max()
}

/// Input signal of length `len`. The AR(1) recursion starts from a unit-variance
/// draw, so it is stationary from the first sample.
pub fn generate_input(kind: InputKind, len: usize, seed: u64) -> Vec<f64> {
    let mut u = vec![0.0; len];
    fill_standard_normal(&mut stream_rng(seed, 0), &mut u);
    if kind == InputKind::Ar1Filtered {
        for t in 1..len {
            u[t] = AR1_POLE * u[t - 1] + AR1_GAIN * u[t];
        }
    }
    u
}

/// `Σ_k θ_k u(t − k)`, treating samples before `t = 0` as zero.
pub fn fir_filter(theta: &DVector<f64>, u: &[f64]) -> Vec<f64> {
    (0..u.len())
        .map(|t| theta.iter().take(t + 1).enumerate().map(|(k, c)| c * u[t - k]).sum())
        .collect()
}

/// FIR regression rows at times `start, start + stride, …` below `u.len()`:
/// `Y_j = y(t_j)`, `Φ_{·,j} = [u(t_j), …, u(t_j − n + 1)]`.
pub fn fir_regression(u: &[f64], y: &[f64], n: usize, start: usize, stride: usize) -> Result<RegressionProblem> {
    if u.len() != y.len() {
        return Err(Error::Dimension(format!("u has {} samples, y has {}", u.len(), y.len())));
    }
    if n == 0 || stride == 0 {
        return Err(Error::config("FIR order and stride must be positive"));
    }
    if start + 1 < n {
        return Err(Error::config(format!("first row {start} precedes a full regressor of order {n}")));
    }
    let times: Vec<usize> = (start..u.len()).step_by(stride).collect();
    if times.len() < n {
        return Err(Error::config(format!(
            "{} samples give {} regression rows, fewer than n = {n}",
            u.len(),
            times.len()
        )));
    }
    let phi = DMatrix::from_fn(n, times.len(), |i, j| u[times[j] - i]);
    let y = DVector::from_iterator(times.len(), times.iter().map(|&t| y[t]));
    RegressionProblem::new(phi, y)
}

/// One synthesized data set with its generating truth.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    /// Noise-free output.
    pub y_clean: Vec<f64>,
    pub start: usize,
    pub stride: usize,
    pub problem: RegressionProblem,
    pub truth: TrueModel,
}

/// Noise variance giving `10·log₁₀(var(ȳ)/σ²) = snr_db`, with `var` the
/// population variance of `ȳ` over the rows.
pub fn noise_variance(y_rows: &[f64], snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        return 0.0;
    }
    let m = y_rows.len() as f64;
    let mean = y_rows.iter().sum::<f64>() / m;
    let var = y_rows.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
    var / 10f64.powf(snr_db / 10.0)
}

/// Data from the FIR truth `theta_star` driven by the input of `spec`.
///
/// Input and noise come from streams 0 and 1 of `spec.seed`; the noise sequence
/// depends only on the seed and length, not on the SNR.
pub fn synthesize_fir(theta_star: &DVector<f64>, spec: &SignalSpec) -> Result<SynthData> {
    let n = theta_star.len();
    if n == 0 {
        return Err(Error::config("FIR order must be positive"));
    }
    if spec.n_rows < n {
        return Err(Error::config(format!("N = {} rows is fewer than n = {n}", spec.n_rows)));
    }
    if spec.snr_db.is_nan() || spec.snr_db == f64::NEG_INFINITY {
        return Err(Error::config(format!("invalid SNR {}", spec.snr_db)));
    }
    let len = spec.n_total(n);
    let start = first_row(n);
    let stride = spec.input_kind.stride(n);

    let u = generate_input(spec.input_kind, len, spec.seed);
    let y_clean = fir_filter(theta_star, &u);
    let rows: Vec<f64> = (start..len).step_by(stride).map(|t| y_clean[t]).collect();
    let sigma_e2 = noise_variance(&rows, spec.snr_db);

    let mut e = vec![0.0; len];
    fill_standard_normal(&mut stream_rng(spec.seed, 1), &mut e);
    let sigma_e = sigma_e2.sqrt();
    let y: Vec<f64> = y_clean.iter().zip(&e).map(|(c, w)| c + sigma_e * w).collect();

    let problem = fir_regression(&u, &y, n, start, stride)?;
    let truth = TrueModel::with_fitted_radius(theta_star.clone(), sigma_e2, FITTED_Q)?;
    Ok(SynthData {
        u,
        y,
        y_clean,
        start,
        stride,
        problem,
        truth,
    })
}

/// Data from the truncated FIR truth of `sys`.
pub fn synthesize(sys: &RandomSystem, spec: &SignalSpec, n: usize) -> Result<SynthData> {
    synthesize_fir(&fir_truth(sys, n), spec)
}
