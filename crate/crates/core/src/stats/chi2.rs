use super::special::{ln_gamma, regularized_gamma_p, regularized_gamma_q};
use crate::error::{Error, Result};

/// Upper-tail quantile request: the `x` with `P(X < x) = 1 − beta` for `X ~ χ²(dof)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareQuantileQuery {
    pub beta: f64,
    pub dof: u64,
}

impl ChiSquareQuantileQuery {
    pub fn new(beta: f64, dof: u64) -> Result<Self> {
        check_probability(beta, "beta")?;
        check_dof(dof)?;
        Ok(Self { beta, dof })
    }
}

fn check_probability(p: f64, name: &str) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} = {p} outside (0, 1)")))
    }
}

fn check_dof(dof: u64) -> Result<()> {
    if dof == 0 {
        Err(Error::domain("chi-square degrees of freedom must be >= 1"))
    } else {
        Ok(())
    }
}

pub fn chi2_cdf(x: f64, dof: u64) -> f64 {
    regularized_gamma_p(dof as f64 / 2.0, x / 2.0)
}

/// Survival function `P(X > x)`.
pub fn chi2_sf(x: f64, dof: u64) -> f64 {
    regularized_gamma_q(dof as f64 / 2.0, x / 2.0)
}

fn chi2_pdf(x: f64, dof: u64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = dof as f64 / 2.0;
    ((k - 1.0) * x.ln() - x / 2.0 - k * std::f64::consts::LN_2 - ln_gamma(k)).exp()
}

/// `χ²_β(dof)`: the value exceeded with probability `beta`.
pub fn chi2_upper_quantile(q: ChiSquareQuantileQuery) -> Result<f64> {
    check_probability(q.beta, "beta")?;
    check_dof(q.dof)?;
    Ok(solve_quantile(q.dof, q.beta, Tail::Upper))
}

/// The value `x` with `P(X < x) = alpha`.
pub fn chi2_lower_quantile(alpha: f64, dof: u64) -> Result<f64> {
    check_probability(alpha, "alpha")?;
    check_dof(dof)?;
    Ok(solve_quantile(dof, alpha, Tail::Lower))
}

#[derive(Clone, Copy)]
enum Tail {
    Lower,
    Upper,
}

/// Bracketed Newton iteration on an increasing residual `h` with `h' = pdf`.
fn solve_quantile(dof: u64, prob: f64, tail: Tail) -> f64 {
    // Evaluate whichever tail is small to avoid cancellation.
    let h = |x: f64| -> f64 {
        match tail {
            Tail::Lower if prob <= 0.5 => chi2_cdf(x, dof) - prob,
            Tail::Lower => (1.0 - prob) - chi2_sf(x, dof),
            Tail::Upper if prob <= 0.5 => prob - chi2_sf(x, dof),
            Tail::Upper => chi2_cdf(x, dof) - (1.0 - prob),
        }
    };

    let mut lo = 0.0;
    let mut hi = (dof as f64).max(1.0);
    while h(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..400 {
        let r = h(x);
        if r == 0.0 {
            return x;
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = chi2_pdf(x, dof);
        let newton = x - r / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x || hi - lo <= 4.0 * f64::EPSILON * hi {
            return next;
        }
        x = next;
    }
    x
}
