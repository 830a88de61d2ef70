//! Achievable-rate estimate under the auxiliary channel law.

use rand::Rng;
use rayon::prelude::*;

use super::bcjr::{log_sum_exp, window};
use super::metrics::BranchMetrics;
use crate::cpm::WaveformConfig;
use crate::error::{Error, Result};
use crate::frontend::{simulate_link_with, ReceiveChain};
use crate::rng::stream_rng;

/// Symbols per simulated frame in the rate estimator.
pub const RATE_FRAME: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub bits_per_symbol: f64,
    pub symbols: usize,
    pub underflow: bool,
}

/// Per-frame sums of `ln W(y_k | x, past)` and `ln W(y_k | past)` after warm-up.
fn frame_log_likelihoods(
    cfg: &WaveformConfig,
    chain: &ReceiveChain,
    metrics: &BranchMetrics,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<(f64, f64, usize)> {
    let trellis = metrics.trellis;
    let layout = &trellis.layout;
    let mut rng = stream_rng(seed, stream);
    let x: Vec<u32> = (0..n).map(|_| rng.gen_range(0..cfg.m_cpm)).collect();
    let y = simulate_link_with(&x, cfg, chain, metrics.n0, &mut rng)?;
    let s = layout.n_states();
    let log_prior = -(cfg.m_cpm as f64).ln();
    let mut alpha = vec![f64::NEG_INFINITY; s];
    alpha[0] = 0.0;
    let mut state = 0usize;
    let (mut cond, mut uncond) = (0.0, 0.0);
    let warm = trellis.warm_up();
    for k in 0..n {
        let g = metrics.log_probs(&window(&y, k, trellis.aux_memory))?;
        let b_true = layout.branch(state, x[k]);
        state = trellis.branches[b_true].to;
        let mut next = vec![f64::NEG_INFINITY; s];
        for (b, br) in trellis.branches.iter().enumerate() {
            next[br.to] = log_sum_exp(next[br.to], alpha[br.from] + g[b] + log_prior);
        }
        // alpha is normalized to total mass one, so the total of `next` is the predictive probability.
        let total = next.iter().fold(f64::NEG_INFINITY, |a, &v| log_sum_exp(a, v));
        next.iter_mut().for_each(|v| *v -= total);
        alpha = next;
        if k >= warm {
            cond += g[b_true];
            uncond += total;
        }
    }
    Ok((cond, uncond, n.saturating_sub(warm)))
}

/// `(1/n) [log2 W(y|x) - log2 W(y)]` averaged over frames of [`RATE_FRAME`] symbols,
/// clamped to `[0, log2 M_cpm]`.
pub fn estimate_information_rate(
    cfg: &WaveformConfig,
    chain: &ReceiveChain,
    metrics: &BranchMetrics,
    n_symbols: usize,
    seed: u64,
) -> Result<RateEstimate> {
    if n_symbols <= metrics.trellis.warm_up() {
        return Err(Error::InvalidConfig(format!("{n_symbols} symbols are too few for a rate estimate")));
    }
    let frames = n_symbols.div_ceil(RATE_FRAME);
    let parts = (0..frames)
        .into_par_iter()
        .map(|f| {
            let len = RATE_FRAME.min(n_symbols - f * RATE_FRAME);
            frame_log_likelihoods(cfg, chain, metrics, len, seed, f as u64)
        })
        .collect::<Result<Vec<_>>>()?;
    let (cond, uncond, count) = parts
        .iter()
        .fold((0.0, 0.0, 0usize), |acc, p| (acc.0 + p.0, acc.1 + p.1, acc.2 + p.2));
    let bits = (cond - uncond) / (count as f64 * std::f64::consts::LN_2);
    Ok(RateEstimate {
        bits_per_symbol: bits.clamp(0.0, (cfg.m_cpm as f64).log2()),
        symbols: count,
        underflow: metrics.underflowed(),
    })
}
