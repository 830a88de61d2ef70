//! Gaussian orthant probabilities.
//!
//! Diagonal covariances factor into one-dimensional tails. Everything else goes
//! through Genz's separation-of-variables transform with variable reordering and a
//! randomly shifted rank-1 lattice rule.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse standard normal CDF.
pub fn norm_inv(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Probability that a Gaussian vector lands in the orthant selected by `signs`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthantQuery {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    /// `true` selects the positive half-line for that coordinate.
    pub positive: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthantSettings {
    /// Target absolute error (three standard errors of the shifted-lattice estimate).
    pub tol: f64,
    pub max_points: usize,
    pub seed: u64,
}

impl Default for OrthantSettings {
    fn default() -> Self {
        Self { tol: 1e-6, max_points: 100_000, seed: 0x5eed_0f_0a7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthantEstimate {
    pub value: f64,
    /// Estimated absolute error; zero on the closed-form path.
    pub error: f64,
}

const DIAG_REL: f64 = 1e-12;
const N_SHIFTS: usize = 8;

fn is_diagonal(cov: &[Vec<f64>]) -> bool {
    let max_diag = cov.iter().enumerate().map(|(i, r)| r[i].abs()).fold(0.0, f64::max);
    cov.iter().enumerate().all(|(i, r)| {
        r.iter().enumerate().all(|(j, v)| i == j || v.abs() < DIAG_REL * max_diag)
    })
}

/// Orthant probability with an absolute error near `settings.tol`.
pub fn orthant_probability(q: &OrthantQuery, settings: &OrthantSettings) -> Result<OrthantEstimate> {
    let d = q.mean.len();
    if q.positive.len() != d || q.cov.len() != d || q.cov.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension(format!(
            "mean {d}, signs {}, covariance {}x{}",
            q.positive.len(),
            q.cov.len(),
            q.cov.first().map_or(0, Vec::len)
        )));
    }
    if d == 0 {
        return Ok(OrthantEstimate { value: 1.0, error: 0.0 });
    }
    // Flip coordinates so every constraint reads Y_i > lower_i with Y ~ N(0, S cov S).
    let s: Vec<f64> = q.positive.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
    let lower: Vec<f64> = (0..d).map(|i| -s[i] * q.mean[i]).collect();
    let cov: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| s[i] * s[j] * q.cov[i][j]).collect())
        .collect();
    for i in 0..d {
        if cov[i][i] < 0.0 {
            return Err(Error::NotPsd { pivot: i, value: cov[i][i] });
        }
        for j in 0..i {
            let (a, b) = (cov[i][j], cov[j][i]);
            if (a - b).abs() > 1e-10 * (cov[i][i] * cov[j][j]).sqrt().max(f64::MIN_POSITIVE) {
                return Err(Error::Dimension("covariance is not symmetric".into()));
            }
        }
    }
    if is_diagonal(&cov) {
        let value = (0..d).map(|i| upper_tail(lower[i], cov[i][i].sqrt())).product();
        return Ok(OrthantEstimate { value, error: 0.0 });
    }
    genz(&lower, &cov, settings)
}

/// `P(sigma Z > a)` including the degenerate `sigma = 0` case.
fn upper_tail(a: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        norm_cdf(-a / sigma)
    } else if a < 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Lower-triangular factor of a reordered problem.
struct Factor {
    lower: Vec<f64>,
    chol: Vec<Vec<f64>>,
}

/// Cholesky factorization with Genz's ordering: at each step take the remaining
/// variable with the smallest conditional probability given the expected values
/// of the variables already placed.
fn reorder_cholesky(lower: &[f64], cov: &[Vec<f64>]) -> Result<Factor> {
    let d = lower.len();
    let mut a = lower.to_vec();
    let mut c: Vec<Vec<f64>> = cov.to_vec();
    let mut l = vec![vec![0.0; d]; d];
    let mut y = vec![0.0; d];
    let scale = (0..d).map(|i| cov[i][i]).fold(0.0, f64::max);
    let eps = 1e-12 * scale.max(f64::MIN_POSITIVE);
    for i in 0..d {
        let mut best = (i, f64::INFINITY);
        for j in i..d {
            let var = c[j][j] - (0..i).map(|k| l[j][k] * l[j][k]).sum::<f64>();
            if var > eps {
                let sd = var.sqrt();
                let shift: f64 = (0..i).map(|k| l[j][k] * y[k]).sum();
                let p = norm_cdf(-(a[j] - shift) / sd);
                if p < best.1 {
                    best = (j, p);
                }
            }
        }
        let j = best.0;
        if j != i {
            a.swap(i, j);
            c.swap(i, j);
            for row in c.iter_mut() {
                row.swap(i, j);
            }
            l.swap(i, j);
        }
        let var = c[i][i] - (0..i).map(|k| l[i][k] * l[i][k]).sum::<f64>();
        if var < -eps {
            return Err(Error::NotPsd { pivot: i, value: var });
        }
        if var <= eps {
            // Degenerate direction: the variable is a fixed combination of earlier ones.
            for r in i..d {
                l[r][i] = 0.0;
            }
            y[i] = 0.0;
            continue;
        }
        let sd = var.sqrt();
        l[i][i] = sd;
        for r in i + 1..d {
            l[r][i] = (c[r][i] - (0..i).map(|k| l[r][k] * l[i][k]).sum::<f64>()) / sd;
        }
        // Mean of the standard normal truncated to (t, inf).
        let shift: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        let t = (a[i] - shift) / sd;
        let tail = norm_cdf(-t);
        let pdf = (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        y[i] = if tail > 1e-300 { pdf / tail } else { t };
    }
    Ok(Factor { lower: a, chol: l })
}

/// Integrand of the transformed problem at the point `w` of the unit cube.
fn integrand(f: &Factor, w: &[f64], y: &mut [f64]) -> f64 {
    let d = f.lower.len();
    let mut prod = 1.0;
    for i in 0..d {
        let shift: f64 = (0..i).map(|k| f.chol[i][k] * y[k]).sum();
        let sd = f.chol[i][i];
        if sd == 0.0 {
            if shift <= f.lower[i] {
                return 0.0;
            }
            y[i] = 0.0;
            continue;
        }
        let tail = norm_cdf(-(f.lower[i] - shift) / sd);
        prod *= tail;
        if prod == 0.0 {
            return 0.0;
        }
        if i + 1 < d {
            // Sample the truncated variable from its upper tail without cancellation.
            let u = ((1.0 - w[i]) * tail).max(1e-300);
            y[i] = -norm_inv(u);
        }
    }
    prod
}

const PRIMES: [f64; 24] = [
    2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0, 31.0, 37.0, 41.0, 43.0, 47.0, 53.0,
    59.0, 61.0, 67.0, 71.0, 73.0, 79.0, 83.0, 89.0,
];

fn genz(lower: &[f64], cov: &[Vec<f64>], settings: &OrthantSettings) -> Result<OrthantEstimate> {
    let d = lower.len();
    let f = reorder_cholesky(lower, cov)?;
    let dims = d - 1;
    if dims == 0 {
        let mut y = vec![0.0; 1];
        return Ok(OrthantEstimate { value: integrand(&f, &[], &mut y), error: 0.0 });
    }
    if dims > PRIMES.len() {
        return Err(Error::Dimension(format!("{d} dimensions exceed the lattice table")));
    }
    let gen: Vec<f64> = PRIMES[..dims].iter().map(|p| p.sqrt().fract()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let shifts: Vec<Vec<f64>> = (0..N_SHIFTS)
        .map(|_| (0..dims).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let mut sums = [0.0; N_SHIFTS];
    let mut y = vec![0.0; d];
    let mut w = vec![0.0; dims];
    let mut anti = vec![0.0; dims];
    let mut n_done = 0usize;
    let mut n_target = 32usize;
    loop {
        for (sum, shift) in sums.iter_mut().zip(&shifts) {
            for i in n_done + 1..=n_target {
                for k in 0..dims {
                    // Baker's transform periodizes the integrand for the lattice.
                    let x = (i as f64 * gen[k] + shift[k]).fract();
                    w[k] = (2.0 * x - 1.0).abs();
                    anti[k] = 1.0 - w[k];
                }
                *sum += 0.5 * (integrand(&f, &w, &mut y) + integrand(&f, &anti, &mut y));
            }
        }
        n_done = n_target;
        let means: Vec<f64> = sums.iter().map(|s| s / n_done as f64).collect();
        let value = means.iter().sum::<f64>() / N_SHIFTS as f64;
        let var = means.iter().map(|m| (m - value).powi(2)).sum::<f64>()
            / (N_SHIFTS * (N_SHIFTS - 1)) as f64;
        let error = 3.0 * var.sqrt();
        if error <= settings.tol || 4 * n_done * N_SHIFTS > settings.max_points {
            return Ok(OrthantEstimate { value: value.clamp(0.0, 1.0), error });
        }
        n_target *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn eye(d: usize) -> Vec<Vec<f64>> {
        (0..d).map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect()).collect()
    }

    #[test]
    fn symmetric_quadrant() {
        let q = OrthantQuery { mean: vec![0.0, 0.0], cov: eye(2), positive: vec![true, true] };
        let p = orthant_probability(&q, &OrthantSettings::default()).unwrap();
        assert_abs_diff_eq!(p.value, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn shifted_quadrant() {
        let q = OrthantQuery { mean: vec![1.0, 1.0], cov: eye(2), positive: vec![true, true] };
        let p = orthant_probability(&q, &OrthantSettings::default()).unwrap();
        assert_abs_diff_eq!(p.value, 0.707_860_981, epsilon = 1e-8);
    }

    #[test]
    fn correlated_bivariate_closed_form() {
        // P(X>0, Y>0) = 1/4 + asin(rho) / (2 pi) for zero-mean unit-variance pairs.
        for rho in [-0.8, -0.3, 0.2, 0.6, 0.95] {
            let q = OrthantQuery {
                mean: vec![0.0, 0.0],
                cov: vec![vec![1.0, rho], vec![rho, 1.0]],
                positive: vec![true, true],
            };
            let p = orthant_probability(&q, &OrthantSettings::default()).unwrap();
            let exact = 0.25 + f64::asin(rho) / (2.0 * std::f64::consts::PI);
            assert_abs_diff_eq!(p.value, exact, epsilon = 1e-5);
        }
    }

    #[test]
    fn trivariate_equicorrelated() {
        // Zero-mean, unit variances, all correlations 1/2: probability 1/4.
        let c = vec![vec![1.0, 0.5, 0.5], vec![0.5, 1.0, 0.5], vec![0.5, 0.5, 1.0]];
        let q = OrthantQuery { mean: vec![0.0; 3], cov: c, positive: vec![true; 3] };
        let p = orthant_probability(&q, &OrthantSettings::default()).unwrap();
        assert_abs_diff_eq!(p.value, 0.25, epsilon = 1e-5);
    }

    #[test]
    fn rejects_bad_input() {
        let q = OrthantQuery { mean: vec![0.0; 2], cov: eye(3), positive: vec![true; 2] };
        assert!(orthant_probability(&q, &OrthantSettings::default()).is_err());
        let q = OrthantQuery {
            mean: vec![0.0; 2],
            cov: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
            positive: vec![true; 2],
        };
        assert!(matches!(
            orthant_probability(&q, &OrthantSettings::default()),
            Err(Error::NotPsd { .. })
        ));
    }
}
