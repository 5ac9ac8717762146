//! Reference computations for the integration tests. None of these call into
//! the library's numerical routines.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// `ln Γ(k/2)` for a positive integer `k`, from `Γ(1) = 1`, `Γ(1/2) = √π` and
/// `Γ(x + 1) = x Γ(x)`.
pub fn ln_gamma_half(k: u64) -> f64 {
    let mut x = if k.is_multiple_of(2) { 1.0 } else { 0.5 };
    let mut acc = if k.is_multiple_of(2) { 0.0 } else { 0.5 * std::f64::consts::PI.ln() };
    while x < k as f64 / 2.0 {
        acc += x.ln();
        x += 1.0;
    }
    acc
}

pub fn chi2_density(x: f64, dof: u64) -> f64 {
    density_with_norm(x, dof, log_norm(dof))
}

fn log_norm(dof: u64) -> f64 {
    dof as f64 / 2.0 * 2f64.ln() + ln_gamma_half(dof)
}

fn density_with_norm(x: f64, dof: u64, log_norm: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    ((dof as f64 / 2.0 - 1.0) * x.ln() - x / 2.0 - log_norm).exp()
}

/// `P(X > x)` by composite Simpson integration of the density out to 60
/// standard deviations past the mean.
pub fn chi2_tail_by_quadrature(x: f64, dof: u64) -> f64 {
    let k = dof as f64;
    let upper = x.max(k) + 60.0 * (2.0 * k).sqrt() + 60.0;
    let steps = 40_000;
    let h = (upper - x) / steps as f64;
    let c = log_norm(dof);
    let mut acc = density_with_norm(x, dof, c) + density_with_norm(upper, dof, c);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * density_with_norm(x + i as f64 * h, dof, c);
    }
    acc * h / 3.0
}

/// Upper quantile `x` with `P(X > x) = beta`, by bisection on the quadrature tail.
pub fn chi2_upper_quantile_by_quadrature(beta: f64, dof: u64) -> f64 {
    let k = dof as f64;
    let (mut lo, mut hi) = (0.0, k + 100.0 * (2.0 * k).sqrt() + 100.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if chi2_tail_by_quadrature(mid, dof) > beta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Small dense regression instance in plain vectors: `phi[i][j]` is regressor `i`
/// at sample `j`.
#[derive(Debug, Clone)]
pub struct Instance {
    pub phi: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Instance {
    pub fn random<R: Rng>(rng: &mut R, n: usize, n_samples: usize, noise: f64) -> Self {
        let phi: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n_samples).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let theta: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(-1.0..1.0) })
            .collect();
        let y = (0..n_samples)
            .map(|j| (0..n).map(|i| phi[i][j] * theta[i]).sum::<f64>() + noise * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self { phi, y }
    }

    pub fn n(&self) -> usize {
        self.phi.len()
    }

    pub fn n_samples(&self) -> usize {
        self.y.len()
    }

    pub fn gram(&self) -> Vec<Vec<f64>> {
        let m = self.n_samples() as f64;
        (0..self.n())
            .map(|a| (0..self.n()).map(|b| dot(&self.phi[a], &self.phi[b]) / m).collect())
            .collect()
    }

    pub fn cross(&self) -> Vec<f64> {
        let m = self.n_samples() as f64;
        self.phi.iter().map(|row| dot(row, &self.y) / m).collect()
    }

    /// `‖Y − Φᵀθ‖² / (2N)` from the residual.
    pub fn loss(&self, theta: &[f64]) -> f64 {
        let m = self.n_samples();
        (0..m)
            .map(|j| {
                let r = self.y[j] - (0..self.n()).map(|i| self.phi[i][j] * theta[i]).sum::<f64>();
                r * r
            })
            .sum::<f64>()
            / (2.0 * m as f64)
    }

    pub fn least_squares(&self) -> Vec<f64> {
        solve_linear(self.gram(), self.cross())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, p);
        b.swap(col, p);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let pivot = a[col].clone();
            for (x, p) in a[row][col..].iter_mut().zip(&pivot[col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

fn inverse_diagonal(g: &[Vec<f64>]) -> Vec<f64> {
    let n = g.len();
    (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            solve_linear(g.to_vec(), e)[j]
        })
        .collect()
}

/// Result of [`grid_search_min_l1`].
#[derive(Debug, Clone)]
pub struct GridOptimum {
    pub l1: f64,
    pub theta: Vec<f64>,
    pub points: u64,
}

/// Smallest `‖θ‖₁` over the grid `step·ℤⁿ` restricted to `L(θ) ≤ target`.
///
/// The feasible set is the ellipsoid `½ dᵀ G d ≤ target − L_NR` around `θ̂_NR`,
/// which sits inside the box `θ̂_NR ± √(2 (target − L_NR) (G⁻¹)_jj)`. All but the
/// last coordinate are enumerated over the box; along the last coordinate the
/// feasible grid points form an interval, found from the roots of the quadratic,
/// and the one closest to zero is taken.
pub fn grid_search_min_l1(inst: &Instance, target: f64, step: f64) -> GridOptimum {
    let n = inst.n();
    let g = inst.gram();
    let nr = inst.least_squares();
    let loss_nr = inst.loss(&nr);
    let budget = target - loss_nr;
    assert!(budget >= 0.0);
    let inv_diag = inverse_diagonal(&g);
    let half: Vec<f64> = inv_diag.iter().map(|d| (2.0 * budget * d).sqrt()).collect();
    let range = |j: usize| -> (i64, i64) {
        (((nr[j] - half[j]) / step).floor() as i64, ((nr[j] + half[j]) / step).ceil() as i64)
    };

    let last = n - 1;
    let mut best = GridOptimum {
        l1: f64::INFINITY,
        theta: vec![],
        points: 0,
    };
    let mut prefix = vec![0i64; last];
    let ranges: Vec<(i64, i64)> = (0..last).map(range).collect();
    for (j, r) in ranges.iter().enumerate() {
        prefix[j] = r.0;
    }
    loop {
        let mut d = vec![0.0; n];
        let mut l1_prefix = 0.0;
        for j in 0..last {
            let v = prefix[j] as f64 * step;
            d[j] = v - nr[j];
            l1_prefix += v.abs();
        }
        if l1_prefix < best.l1 {
            // ½ G_ll t² + b t + c ≤ budget with t = θ_last − nr_last.
            let a2 = 0.5 * g[last][last];
            let b: f64 = (0..last).map(|j| g[last][j] * d[j]).sum();
            let c: f64 = 0.5 * (0..last).map(|i| (0..last).map(|j| d[i] * g[i][j] * d[j]).sum::<f64>()).sum::<f64>();
            let disc = b * b - 4.0 * a2 * (c - budget);
            if disc >= 0.0 {
                let root = disc.sqrt();
                let lo = nr[last] + (-b - root) / (2.0 * a2);
                let hi = nr[last] + (-b + root) / (2.0 * a2);
                let k_lo = (lo / step).ceil() as i64;
                let k_hi = (hi / step).floor() as i64;
                if k_lo <= k_hi {
                    let k = if k_lo > 0 { k_lo } else if k_hi < 0 { k_hi } else { 0 };
                    let mut theta: Vec<f64> = (0..last).map(|j| prefix[j] as f64 * step).collect();
                    theta.push(k as f64 * step);
                    best.points += 1;
                    // Rounding at the interval ends can leave the point a hair
                    // outside; confirm on the residual.
                    let l1 = l1_prefix + (k as f64 * step).abs();
                    if l1 < best.l1 && inst.loss(&theta) <= target {
                        best.l1 = l1;
                        best.theta = theta;
                    }
                }
            }
        }
        // Odometer increment over the prefix coordinates.
        let mut j = 0;
        loop {
            if j == last {
                return best;
            }
            prefix[j] += 1;
            if prefix[j] <= ranges[j].1 {
                break;
            }
            prefix[j] = ranges[j].0;
            j += 1;
        }
    }
}
