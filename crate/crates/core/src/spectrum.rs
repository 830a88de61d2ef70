//! Power spectral density, containment bandwidth and the SNR / efficiency metrics
//! defined relative to it.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cpm::{modulate, TiltedState, WaveformConfig};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Averaged modified periodogram settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchParams {
    pub segment: usize,
    /// Fraction of a segment shared with the next one.
    pub overlap: f64,
}

impl Default for WelchParams {
    fn default() -> Self {
        Self { segment: 1 << 14, overlap: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    /// Bin centres in cycles per symbol, ascending.
    pub freqs: Vec<f64>,
    /// Density per bin.
    pub power: Vec<f64>,
    pub total_power: f64,
    pub params: WelchParams,
    pub n_symbols: usize,
    pub seed: u64,
}

impl PsdEstimate {
    pub fn bin_width(&self) -> f64 {
        self.freqs.get(1).zip(self.freqs.first()).map_or(0.0, |(b, a)| b - a)
    }
}

/// Welch estimate of `exp(j psi)` for i.u.d. symbols, Hann window.
pub fn estimate_psd(cfg: &WaveformConfig, n_symbols: usize, seed: u64, welch: WelchParams) -> Result<PsdEstimate> {
    cfg.validate()?;
    let mut rng = stream_rng(seed, 0);
    let x: Vec<u32> = (0..n_symbols).map(|_| rng.gen_range(0..cfg.m_cpm)).collect();
    let s = modulate(&x, cfg, &TiltedState::initial(cfg))?;
    welch_psd(&s, cfg.samples_per_symbol() as f64 / cfg.ts, welch).map(|(freqs, power, total)| {
        PsdEstimate { freqs, power, total_power: total, params: welch, n_symbols, seed }
    })
}

/// Welch PSD of `s` sampled at `fs`; returns ascending frequencies, densities and total power.
pub fn welch_psd(s: &[Complex64], fs: f64, welch: WelchParams) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let n = welch.segment;
    if n < 2 || n > s.len() {
        return Err(Error::SegmentTooLong { segment: n, signal: s.len() });
    }
    if !(0.0..1.0).contains(&welch.overlap) {
        return Err(Error::InvalidConfig("overlap must lie in [0, 1)".into()));
    }
    let hop = ((n as f64 * (1.0 - welch.overlap)).round() as usize).max(1);
    let window: Vec<f64> = (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect();
    let wnorm: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut acc = vec![0.0; n];
    let mut count = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut start = 0;
    while start + n <= s.len() {
        for ((b, v), w) in buf.iter_mut().zip(&s[start..start + n]).zip(&window) {
            *b = v * w;
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let scale = 1.0 / (count as f64 * fs * wnorm);
    let df = fs / n as f64;
    // Reorder FFT bins so frequencies ascend from -fs/2.
    let half = n / 2;
    let (freqs, power): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|i| {
            let bin = (i + n - half) % n;
            ((i as f64 - half as f64) * df, acc[bin] * scale)
        })
        .unzip();
    let total = trapezoid(&power, df);
    Ok((freqs, power, total))
}

fn trapezoid(p: &[f64], df: f64) -> f64 {
    let inner: f64 = p.iter().sum();
    (inner - 0.5 * (p[0] + p[p.len() - 1])) * df
}

/// Width of the smallest run of contiguous bins holding at least `fraction` of the power.
pub fn containment_bandwidth(psd: &PsdEstimate, fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("fraction {fraction} outside (0, 1)")));
    }
    let total: f64 = psd.power.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegeneratePsd);
    }
    let target = fraction * total;
    let mut best = usize::MAX;
    let mut sum = 0.0;
    let mut lo = 0;
    for hi in 0..psd.power.len() {
        sum += psd.power[hi];
        while lo <= hi && sum - psd.power[lo] >= target {
            sum -= psd.power[lo];
            lo += 1;
        }
        if sum >= target {
            best = best.min(hi - lo + 1);
        }
    }
    Ok(best as f64 * psd.bin_width())
}

/// Noise density giving `snr_db` over the containment bandwidth `b90`.
pub fn snr_to_noise_density(snr_db: f64, es: f64, ts: f64, b90: f64) -> f64 {
    es / (ts * b90 * 10f64.powf(snr_db / 10.0))
}

/// Inverse of [`snr_to_noise_density`].
pub fn noise_density_to_snr(n0: f64, es: f64, ts: f64, b90: f64) -> f64 {
    10.0 * (es / (ts * b90 * n0)).log10()
}

/// Bits per second per hertz for a rate in bits per symbol.
pub fn spectral_efficiency(bits_per_symbol: f64, bandwidth: f64, ts: f64) -> f64 {
    bits_per_symbol / (bandwidth * ts)
}

/// Kept samples per symbol relative to the containment bandwidth.
pub fn effective_osr(oversampling: u32, bandwidth: f64, ts: f64) -> f64 {
    oversampling as f64 / (bandwidth * ts)
}

/// Containment bandwidths and derived figures for one waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthReport {
    pub b90_ts: f64,
    pub b95_ts: f64,
    pub eff90: f64,
    pub eff95: f64,
    pub osr_eff: f64,
}

impl BandwidthReport {
    pub fn from_psd(psd: &PsdEstimate, cfg: &WaveformConfig) -> Result<Self> {
        let b90 = containment_bandwidth(psd, 0.90)?;
        let b95 = containment_bandwidth(psd, 0.95)?;
        let bits = (cfg.m_cpm as f64).log2();
        Ok(Self {
            b90_ts: b90 * cfg.ts,
            b95_ts: b95 * cfg.ts,
            eff90: spectral_efficiency(bits, b90, cfg.ts),
            eff95: spectral_efficiency(bits, b95, cfg.ts),
            osr_eff: effective_osr(cfg.oversampling, b90, cfg.ts),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn msk() -> WaveformConfig {
        WaveformConfig {
            m_cpm: 2,
            k: 1,
            p: 2,
            ts: 1.0,
            t_cpm: 1.0,
            phi0: 0.0,
            n_if: 0.0,
            oversampling: 1,
            grid: 32,
            es: 1.0,
        }
    }

    #[test]
    fn snr_examples() {
        assert_relative_eq!(snr_to_noise_density(0.0, 1.0, 1.0, 1.0), 1.0);
        assert_relative_eq!(snr_to_noise_density(10.0, 1.0, 1.0, 0.5), 0.2, epsilon = 1e-15);
        for s in [-7.5, 0.0, 12.04, 30.0] {
            let n0 = snr_to_noise_density(s, 2.0, 1.0, 0.3);
            assert_relative_eq!(noise_density_to_snr(n0, 2.0, 1.0, 0.3), s, epsilon = 1e-12);
        }
    }

    #[test]
    fn efficiency_examples() {
        assert_relative_eq!(effective_osr(5, 3.0 / 3.467, 1.0), 5.778, epsilon = 1e-3);
        assert_relative_eq!(effective_osr(1, 1.0 / 3.891, 1.0), 3.891, epsilon = 1e-12);
        assert_eq!(spectral_efficiency(0.0, 0.4, 1.0), 0.0);
    }

    #[test]
    fn tone_lands_in_one_bin() {
        let cfg = WaveformConfig { k: 1, p: 4, ..msk() };
        let fs = 32.0;
        let f0 = crate::cpm::tilt_frequency(&cfg);
        let s: Vec<_> = (0..1 << 15)
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * f0 * i as f64 / fs))
            .collect();
        let (freqs, power, _) = welch_psd(&s, fs, WelchParams { segment: 4096, overlap: 0.5 }).unwrap();
        let peak = power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((freqs[peak] - f0).abs() < fs / 4096.0);
        let near: f64 = power[peak - 1..=peak + 1].iter().sum();
        assert!(near / power.iter().sum::<f64>() > 0.99);
    }

    #[test]
    fn msk_99_percent_bandwidth() {
        let psd = estimate_psd(&msk(), 1 << 15, 3, WelchParams::default()).unwrap();
        let b99 = containment_bandwidth(&psd, 0.99).unwrap();
        assert_relative_eq!(b99, 1.18, max_relative = 0.05);
    }

    #[test]
    fn total_power_matches_trapezoid() {
        let psd = estimate_psd(&msk(), 1 << 13, 1, WelchParams { segment: 2048, overlap: 0.5 }).unwrap();
        let sum: f64 = psd.power.iter().sum::<f64>() * psd.bin_width();
        assert_relative_eq!(psd.total_power, sum, max_relative = 1e-3);
        assert_relative_eq!(psd.total_power, 1.0, max_relative = 0.01);
    }

    #[test]
    fn degenerate_psd_rejected() {
        let psd = PsdEstimate {
            freqs: vec![0.0, 1.0],
            power: vec![0.0, 0.0],
            total_power: 0.0,
            params: WelchParams::default(),
            n_symbols: 0,
            seed: 0,
        };
        assert!(matches!(containment_bandwidth(&psd, 0.9), Err(Error::DegeneratePsd)));
    }
}
