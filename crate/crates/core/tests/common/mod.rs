#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use onebit_cpm::cpm::WaveformConfig;
use onebit_cpm::detection::{orthant_probability, BranchMetrics, OrthantQuery, OrthantSettings};
use onebit_cpm::frontend::{apply_chain, build_rx_filter, complex_awgn, OneBit, QuantizedFrame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

pub fn ftn(t_cpm: f64, grid: u32) -> WaveformConfig {
    WaveformConfig {
        m_cpm: 2,
        k: 1,
        p: 4,
        ts: 1.0,
        t_cpm,
        phi0: PI / 4.0,
        n_if: 0.0,
        oversampling: 1,
        grid,
        es: 1.0,
    }
}

pub fn cpfsk4(oversampling: u32, grid: u32) -> WaveformConfig {
    WaveformConfig {
        m_cpm: 4,
        k: 1,
        p: 4,
        ts: 1.0,
        t_cpm: 1.0,
        phi0: PI / 4.0,
        n_if: 0.0,
        oversampling,
        grid,
        es: 1.0,
    }
}

/// Samples of the `N + 1` symbols ending at `k`, clamped at the frame start.
pub fn branch_window(y: &QuantizedFrame, k: usize, aux_memory: usize) -> Vec<OneBit> {
    (0..=aux_memory)
        .flat_map(|j| y.symbol((k + j).saturating_sub(aux_memory)).to_vec())
        .collect()
}

fn lse(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Symbol APPs by enumerating every input sequence from state 0.
pub fn exhaustive_app(y: &QuantizedFrame, metrics: &BranchMetrics) -> Vec<Vec<f64>> {
    let layout = &metrics.trellis.layout;
    let m = layout.m_cpm as usize;
    let n = y.n_symbols;
    let gammas: Vec<_> = (0..n)
        .map(|k| metrics.log_probs(&branch_window(y, k, metrics.trellis.aux_memory)).unwrap())
        .collect();
    let mut acc = vec![vec![f64::NEG_INFINITY; m]; n];
    let mut x = vec![0u32; n];
    for idx in 0..m.pow(n as u32) {
        let mut rest = idx;
        for v in x.iter_mut() {
            *v = (rest % m) as u32;
            rest /= m;
        }
        let mut state = 0;
        let mut ll = 0.0;
        for (k, &xk) in x.iter().enumerate() {
            let b = state * m + xk as usize;
            ll += gammas[k][b];
            state = layout.to_state(b);
        }
        for (k, &xk) in x.iter().enumerate() {
            acc[k][xk as usize] = lse(acc[k][xk as usize], ll);
        }
    }
    acc.into_iter()
        .map(|row| {
            let top = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lin: Vec<f64> = row.iter().map(|v| (v - top).exp()).collect();
            let total: f64 = lin.iter().sum();
            lin.into_iter().map(|v| v / total).collect()
        })
        .collect()
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            (0.5 * (1.0 - x), 0.5 * w)
        })
        .collect()
}

/// Composite Gauss-Legendre rule: `panels` equal panels of `n` nodes each.
pub fn composite_rule(n: usize, panels: usize) -> Vec<(f64, f64)> {
    let base = gauss_legendre(n);
    (0..panels)
        .flat_map(|p| {
            base.iter()
                .map(move |&(x, w)| ((p as f64 + x) / panels as f64, w / panels as f64))
        })
        .collect()
}

/// Composite rule after the substitution `u = t^2 (3 - 2t)`, which flattens the
/// inverse-normal endpoint behaviour of the conditioned integrand.
pub fn smoothed_rule(n: usize, panels: usize) -> Vec<(f64, f64)> {
    composite_rule(n, panels)
        .into_iter()
        .map(|(t, w)| (t * t * (3.0 - 2.0 * t), w * 6.0 * t * (1.0 - t)))
        .collect()
}

fn plain_cholesky(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = a.len();
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][i] = (a[i][i] - s).sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// `P(X in orthant)` by a tensor-product rule over the sequentially conditioned
/// variables, in the original variable order.
pub fn orthant_by_quadrature(q: &OrthantQuery, rule: &[(f64, f64)]) -> f64 {
    let nd = Normal::new(0.0, 1.0).unwrap();
    let d = q.mean.len();
    let s: Vec<f64> = q.positive.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
    let lower: Vec<f64> = (0..d).map(|i| -s[i] * q.mean[i]).collect();
    let cov: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| s[i] * s[j] * q.cov[i][j]).collect()).collect();
    let l = plain_cholesky(&cov);
    fn recurse(
        i: usize,
        l: &[Vec<f64>],
        lower: &[f64],
        rule: &[(f64, f64)],
        z: &mut Vec<f64>,
        nd: &Normal,
    ) -> f64 {
        let shift: f64 = (0..i).map(|k| l[i][k] * z[k]).sum();
        let t = (lower[i] - shift) / l[i][i];
        let tail = nd.cdf(-t);
        if i + 1 == lower.len() || tail == 0.0 {
            return tail;
        }
        let mut acc = 0.0;
        for &(u, w) in rule {
            z.push(-nd.inverse_cdf((1.0 - u) * tail));
            acc += w * recurse(i + 1, l, lower, rule, z, nd);
            z.pop();
        }
        tail * acc
    }
    recurse(0, &l, &lower, rule, &mut Vec::with_capacity(d), &nd)
}

/// A random orthant query with unit-scale covariance and moderate correlation.
pub fn random_query<R: Rng>(rng: &mut R, d: usize) -> OrthantQuery {
    let a: Vec<Vec<f64>> = (0..d)
        .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let mut cov: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| (0..d).map(|k| a[i][k] * a[j][k]).sum::<f64>()).collect())
        .collect();
    for (i, row) in cov.iter_mut().enumerate() {
        row[i] += d as f64;
    }
    let sd: Vec<f64> = (0..d).map(|i| cov[i][i].sqrt()).collect();
    let cov = (0..d).map(|i| (0..d).map(|j| cov[i][j] / (sd[i] * sd[j])).collect()).collect();
    OrthantQuery {
        mean: (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        cov,
        positive: (0..d).map(|_| rng.gen_bool(0.5)).collect(),
    }
}

/// Worst absolute gap between `orthant_probability` and the quadrature oracle over
/// `cases` random queries of 2 to 6 dimensions.
pub fn orthant_oracle_gap(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let settings = OrthantSettings::default();
    (0..cases)
        .map(|c| {
            let d = 2 + c % 5;
            let q = random_query(&mut rng, d);
            let rule = match d {
                2 | 3 => smoothed_rule(20, 4),
                4 => smoothed_rule(12, 3),
                _ => smoothed_rule(10, 2),
            };
            let exact = orthant_by_quadrature(&q, &rule);
            let est = orthant_probability(&q, &settings).unwrap().value;
            (est - exact).abs()
        })
        .fold(0.0, f64::max)
}

/// Post-filter noise variance over `n0` for grid multiplier `grid`.
pub fn noise_variance_ratio(grid: u32, n_symbols: usize, seed: u64) -> f64 {
    let cfg = ftn(1.0, grid);
    let chain = build_rx_filter(&cfg, 1.0).unwrap();
    let n0 = 0.37;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = n_symbols * chain.samples_per_symbol();
    let noise = complex_awgn(&mut rng, len, chain.sigma_n2_grid(n0));
    let zero = vec![Complex64::new(0.0, 0.0); len];
    let z = apply_chain(&chain, &zero, &noise).unwrap();
    let tail = &z[chain.l_g..];
    tail.iter().map(|v| v.norm_sqr()).sum::<f64>() / tail.len() as f64 / n0
}
