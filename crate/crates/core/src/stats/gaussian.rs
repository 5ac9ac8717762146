use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::rng::stream_rng;
use crate::error::{Error, Result};

/// Density of `N(0, sigma2)` at `x`.
pub fn gaussian_pdf(x: f64, sigma2: f64) -> f64 {
    (-x * x / (2.0 * sigma2)).exp() / (2.0 * std::f64::consts::PI * sigma2).sqrt()
}

pub fn fill_standard_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out {
        *v = rng.sample(StandardNormal);
    }
}

/// `n × N` matrix with i.i.d. `N(0, Σ)` columns, drawn as `L Z` with `Σ = L Lᵀ`.
pub fn sample_gaussian_matrix(sigma: &DMatrix<f64>, n_samples: usize, seed: u64) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    if sigma.ncols() != n {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("covariance has no Cholesky factor".into()))?;
    let mut z = DMatrix::zeros(n, n_samples);
    fill_standard_normal(&mut stream_rng(seed, 0), z.as_mut_slice());
    Ok(chol.l() * z)
}
