//! Empirical curvature `κ_α` of the quadratic loss over a Σ-Gaussian ensemble.
//!
//! The Hessian of the loss is `(1/N) Φ Φᵀ`. With the columns of `Φ` drawn i.i.d.
//! from `N(0, Σ)`, its smallest eigenvalue is random; `w_min` is the lower
//! α-quantile of that distribution and `κ_α = w_min / 2`, so that a fresh
//! ensemble satisfies `(1/N) Φ Φᵀ ⪰ 2 κ_α I` with probability about `1 − α`.
//!
//! `Φ Φᵀ` is Wishart(Σ, N), and trials draw it through the Bartlett
//! decomposition instead of forming the `n × N` matrix, which makes each trial
//! cost independent of `N`. [`ensemble_coverage`] samples `Φ` directly and so
//! doubles as a check of that shortcut.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{derive_seed, sample_gaussian_matrix, stream_rng};

pub const DEFAULT_TRIALS: usize = 10_000;
pub const MIN_TRIALS: usize = 1_000;

/// Result of [`estimate_kappa_alpha`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureEstimate {
    pub sigma_digest: u64,
    pub n: usize,
    pub n_samples: usize,
    pub alpha: f64,
    pub trials: usize,
    pub seed: u64,
    pub w_min: f64,
    pub kappa_alpha: f64,
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn smallest_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::Dimension(format!("expected a nonempty square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("matrix has non-finite entries"));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::domain("matrix is not symmetric"));
    }
    Ok(m.symmetric_eigenvalues().min())
}

/// Order-independent fingerprint of a covariance matrix (FNV-1a over its bits).
pub fn sigma_digest(sigma: &DMatrix<f64>) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |word: u64| {
        for byte in word.to_le_bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    feed(sigma.nrows() as u64);
    feed(sigma.ncols() as u64);
    // Column-major order; the matrix is symmetric so this is also row-major.
    for v in sigma.iter() {
        feed(v.to_bits());
    }
    hash
}

fn cholesky_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if sigma.nrows() != sigma.ncols() || sigma.nrows() == 0 {
        return Err(Error::Dimension("covariance must be a nonempty square matrix".into()));
    }
    sigma
        .clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPositiveDefinite("covariance has no Cholesky factor".into()))
}

/// One draw of `(1/N) Φ Φᵀ` via `Φ Φᵀ = L A Aᵀ Lᵀ`, where `A` is lower triangular
/// with `A_ii² ~ χ²(N − i)` (zero-based `i`) and standard normal entries below the
/// diagonal.
fn bartlett_gram<R: Rng>(chol: &DMatrix<f64>, n_samples: usize, rng: &mut R) -> DMatrix<f64> {
    let n = chol.nrows();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let dof = (n_samples - i) as f64;
        let chi = ChiSquared::new(dof).expect("positive degrees of freedom");
        a[(i, i)] = rng.sample(chi).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = chol * a;
    let mut gram = &la * la.transpose();
    gram /= n_samples as f64;
    gram
}

fn check_estimate_args(sigma: &DMatrix<f64>, n_samples: usize, alpha: f64, trials: usize) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::config(format!("curvature needs at least {MIN_TRIALS} trials, got {trials}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha = {alpha} outside (0, 1)")));
    }
    if n_samples < sigma.nrows() {
        return Err(Error::config(format!(
            "N = {n_samples} below dimension n = {}: the Gram matrix is singular",
            sigma.nrows()
        )));
    }
    Ok(())
}

/// Smallest eigenvalues of `trials` independent draws of `(1/N) Φ Φᵀ`, in trial order.
///
/// Trial `k` uses its own stream of `seed`, so the result does not depend on how
/// the trials are spread over threads.
pub fn smallest_eigenvalue_samples(sigma: &DMatrix<f64>, n_samples: usize, trials: usize, seed: u64) -> Result<Vec<f64>> {
    let chol = cholesky_factor(sigma)?;
    if n_samples < sigma.nrows() {
        return Err(Error::config("N must be at least n"));
    }
    Ok((0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            bartlett_gram(&chol, n_samples, &mut rng).symmetric_eigenvalues().min()
        })
        .collect())
}

/// Lower empirical quantile: the `⌈α·m⌉`-th smallest of `m` samples.
pub fn lower_empirical_quantile(samples: &[f64], alpha: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("no samples"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha = {alpha} outside (0, 1)")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((alpha * sorted.len() as f64).ceil() as usize).max(1);
    Ok(sorted[rank - 1])
}

pub fn estimate_kappa_alpha(
    sigma: &DMatrix<f64>,
    n_samples: usize,
    alpha: f64,
    trials: usize,
    seed: u64,
) -> Result<CurvatureEstimate> {
    check_estimate_args(sigma, n_samples, alpha, trials)?;
    let samples = smallest_eigenvalue_samples(sigma, n_samples, trials, seed)?;
    let w_min = lower_empirical_quantile(&samples, alpha)?;
    if !(w_min > 0.0) {
        return Err(Error::NotPositiveDefinite(format!("alpha-quantile of the smallest eigenvalue is {w_min}")));
    }
    Ok(CurvatureEstimate {
        sigma_digest: sigma_digest(sigma),
        n: sigma.nrows(),
        n_samples,
        alpha,
        trials,
        seed,
        w_min,
        kappa_alpha: w_min / 2.0,
    })
}

/// Fraction of `trials` fresh ensembles `Φ` (sampled column by column) with
/// `λ_min((1/N) Φ Φᵀ) ≥ w_min`.
pub fn ensemble_coverage(sigma: &DMatrix<f64>, n_samples: usize, w_min: f64, trials: usize, seed: u64) -> Result<f64> {
    cholesky_factor(sigma)?;
    if trials == 0 {
        return Err(Error::domain("need at least one trial"));
    }
    let hits = (0..trials)
        .into_par_iter()
        .map(|k| {
            let phi = sample_gaussian_matrix(sigma, n_samples, derive_seed(seed, &[k as u64]))?;
            let gram = (&phi * phi.transpose()) / n_samples as f64;
            Ok(usize::from(gram.symmetric_eigenvalues().min() >= w_min))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(hits as f64 / trials as f64)
}

/// Cache key: everything the estimate is a deterministic function of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CurvatureKey {
    pub sigma_digest: u64,
    pub n: usize,
    pub n_samples: usize,
    pub alpha_bits: u64,
    pub trials: usize,
    pub seed: u64,
}

impl CurvatureKey {
    pub fn new(sigma: &DMatrix<f64>, n_samples: usize, alpha: f64, trials: usize, seed: u64) -> Self {
        Self {
            sigma_digest: sigma_digest(sigma),
            n: sigma.nrows(),
            n_samples,
            alpha_bits: alpha.to_bits(),
            trials,
            seed,
        }
    }

    fn of(est: &CurvatureEstimate) -> Self {
        Self {
            sigma_digest: est.sigma_digest,
            n: est.n,
            n_samples: est.n_samples,
            alpha_bits: est.alpha.to_bits(),
            trials: est.trials,
            seed: est.seed,
        }
    }
}

/// Curvature estimates persisted as CSV, one [`CurvatureEstimate`] per row.
#[derive(Debug, Clone, Default)]
pub struct CurvatureCache {
    entries: BTreeMap<CurvatureKey, CurvatureEstimate>,
}

impl CurvatureCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reads a cache file; a missing file yields an empty cache.
    pub fn load(path: &Path) -> Result<Self> {
        match File::open(path) {
            Ok(file) => Self::read(file),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut cache = Self::new();
        for row in csv::Reader::from_reader(reader).deserialize() {
            let est: CurvatureEstimate = row?;
            cache.insert(est);
        }
        Ok(cache)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(File::create(path)?)
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        for est in self.entries.values() {
            out.serialize(est)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn get(&self, key: &CurvatureKey) -> Option<&CurvatureEstimate> {
        self.entries.get(key)
    }

    pub fn insert(&mut self, est: CurvatureEstimate) {
        self.entries.insert(CurvatureKey::of(&est), est);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Cached estimate for the arguments, computing and storing it on a miss.
    pub fn get_or_estimate(
        &mut self,
        sigma: &DMatrix<f64>,
        n_samples: usize,
        alpha: f64,
        trials: usize,
        seed: u64,
    ) -> Result<CurvatureEstimate> {
        let key = CurvatureKey::new(sigma, n_samples, alpha, trials, seed);
        if let Some(est) = self.entries.get(&key) {
            return Ok(*est);
        }
        let est = estimate_kappa_alpha(sigma, n_samples, alpha, trials, seed)?;
        self.entries.insert(key, est);
        Ok(est)
    }
}
