//! Special functions, χ² quantiles and seeded Gaussian sampling.

mod chi2;
mod gaussian;
mod rng;
mod special;

pub use chi2::{chi2_cdf, chi2_lower_quantile, chi2_sf, chi2_upper_quantile, ChiSquareQuantileQuery};
pub use gaussian::{fill_standard_normal, gaussian_pdf, sample_gaussian_matrix};
pub use rng::{derive_seed, stream_rng, StreamRng};
pub use special::{ln_gamma, regularized_gamma_p, regularized_gamma_q};
