//! Log-domain forward-backward symbol APP detection.

use super::metrics::BranchMetrics;
use crate::error::{Error, Result};
use crate::frontend::{OneBit, QuantizedFrame};

/// Per-symbol posteriors and hard decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct AppTable {
    /// Row-major `n_symbols x m_cpm` probabilities.
    pub probs: Vec<f64>,
    pub m_cpm: usize,
    pub decisions: Vec<u32>,
}

impl AppTable {
    pub fn row(&self, k: usize) -> &[f64] {
        &self.probs[k * self.m_cpm..(k + 1) * self.m_cpm]
    }

    pub fn n_symbols(&self) -> usize {
        self.decisions.len()
    }
}

pub(crate) fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Samples of the `N + 1` symbols ending at `k`; indices before the frame repeat symbol 0.
pub(crate) fn window(y: &QuantizedFrame, k: usize, aux_memory: usize) -> Vec<OneBit> {
    (0..=aux_memory)
        .flat_map(|j| y.symbol((k + j).saturating_sub(aux_memory)).iter().copied())
        .collect()
}

/// Symbol APPs over the trellis, forward started in state 0 and backward uniform.
///
/// `priors` defaults to uniform. Ties in the hard decision go to the lowest symbol.
pub fn bcjr_detect(y: &QuantizedFrame, metrics: &BranchMetrics, priors: Option<&[f64]>) -> Result<AppTable> {
    let trellis = metrics.trellis;
    let layout = &trellis.layout;
    let m = layout.m_cpm as usize;
    let n = y.n_symbols;
    if y.oversampling != trellis.oversampling {
        return Err(Error::LengthMismatch { left: y.oversampling, right: trellis.oversampling });
    }
    if n < trellis.warm_up().max(1) {
        return Err(Error::InvalidConfig(format!(
            "frame of {n} symbols is shorter than the warm-up of {}",
            trellis.warm_up()
        )));
    }
    let log_prior: Vec<f64> = match priors {
        None => vec![-(m as f64).ln(); m],
        Some(p) if p.len() == m => p.iter().map(|v| v.ln()).collect(),
        Some(p) => return Err(Error::LengthMismatch { left: p.len(), right: m }),
    };
    let s = layout.n_states();
    let gammas = (0..n)
        .map(|k| metrics.log_probs(&window(y, k, trellis.aux_memory)))
        .collect::<Result<Vec<_>>>()?;

    let mut alpha = vec![f64::NEG_INFINITY; (n + 1) * s];
    alpha[0] = 0.0;
    for k in 0..n {
        let (prev, next) = alpha.split_at_mut((k + 1) * s);
        let prev = &prev[k * s..];
        let next = &mut next[..s];
        for (b, br) in trellis.branches.iter().enumerate() {
            let v = prev[br.from] + gammas[k][b] + log_prior[br.symbol as usize];
            next[br.to] = log_sum_exp(next[br.to], v);
        }
        normalize(next);
    }

    let mut beta = vec![0.0; s];
    let mut probs = vec![0.0; n * m];
    let mut decisions = vec![0; n];
    for k in (0..n).rev() {
        let a = &alpha[k * s..(k + 1) * s];
        let mut app = vec![f64::NEG_INFINITY; m];
        let mut back = vec![f64::NEG_INFINITY; s];
        for (b, br) in trellis.branches.iter().enumerate() {
            let g = gammas[k][b] + log_prior[br.symbol as usize] + beta[br.to];
            app[br.symbol as usize] = log_sum_exp(app[br.symbol as usize], a[br.from] + g);
            back[br.from] = log_sum_exp(back[br.from], g);
        }
        normalize(&mut back);
        beta = back;
        let top = app.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lin: Vec<f64> = app.iter().map(|v| (v - top).exp()).collect();
        let total: f64 = lin.iter().sum();
        let row = &mut probs[k * m..(k + 1) * m];
        for (r, v) in row.iter_mut().zip(&lin) {
            *r = v / total;
        }
        // First maximum wins, which is the lowest symbol index.
        decisions[k] = app
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
            .0 as u32;
    }
    Ok(AppTable { probs, m_cpm: m, decisions })
}

fn normalize(v: &mut [f64]) {
    let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top.is_finite() {
        v.iter_mut().for_each(|x| *x -= top);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpm::WaveformConfig;
    use crate::detection::{build_trellis, OrthantSettings, DEFAULT_PROB_FLOOR};
    use crate::frontend::{build_rx_filter, simulate_link};
    use std::f64::consts::PI;

    fn ftn() -> WaveformConfig {
        WaveformConfig {
            m_cpm: 2,
            k: 1,
            p: 4,
            ts: 1.0,
            t_cpm: 1.0,
            phi0: PI / 4.0,
            n_if: 0.0,
            oversampling: 1,
            grid: 16,
            es: 1.0,
        }
    }

    #[test]
    fn lse_handles_empty_terms() {
        assert_eq!(log_sum_exp(f64::NEG_INFINITY, -2.0), -2.0);
        assert_eq!(log_sum_exp(1.5, f64::NEG_INFINITY), 1.5);
        assert!((log_sum_exp(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn low_noise_frame_is_recovered() {
        let cfg = ftn();
        let chain = build_rx_filter(&cfg, 1.0).unwrap();
        let trellis = build_trellis(&cfg, &chain, 0).unwrap();
        let metrics = BranchMetrics::new(&trellis, 1e-3, OrthantSettings::default(), DEFAULT_PROB_FLOOR).unwrap();
        let x: Vec<u32> = (0..64).map(|i| (i * 7 % 5 % 2) as u32).collect();
        let y = simulate_link(&x, &cfg, &chain, 1e-3, 17).unwrap();
        let app = bcjr_detect(&y, &metrics, None).unwrap();
        let warm = trellis.warm_up();
        let end = x.len() - trellis.channel_memory;
        assert_eq!(&app.decisions[warm..end], &x[warm..end]);
        assert_eq!(app.n_symbols(), x.len());
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let cfg = ftn();
        let chain = build_rx_filter(&cfg, 1.0).unwrap();
        let trellis = build_trellis(&cfg, &chain, 0).unwrap();
        let metrics = BranchMetrics::new(&trellis, 0.5, OrthantSettings::default(), DEFAULT_PROB_FLOOR).unwrap();
        let y = simulate_link(&[0, 1, 1, 0], &cfg, &chain, 0.5, 1).unwrap();
        assert!(matches!(
            bcjr_detect(&y, &metrics, Some(&[0.2, 0.3, 0.5])),
            Err(Error::LengthMismatch { left: 3, right: 2 })
        ));
        let short = QuantizedFrame::new(y.samples[..1].to_vec(), 1).unwrap();
        assert!(bcjr_detect(&short, &metrics, None).is_err());
        let wide = QuantizedFrame::new(y.samples.clone(), 2).unwrap();
        assert!(bcjr_detect(&wide, &metrics, None).is_err());
    }
}
