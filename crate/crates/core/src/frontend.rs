//! Receive chain: bandpass filtering on the high-rate grid, decimation, AWGN
//! injection and per-sample 1-bit quantization.
//!
//! Taps carry the grid spacing so discrete filtering approximates the
//! continuous convolution integral; the per-grid-sample noise variance is
//! `N0 / dt`, which puts the post-filter noise variance at `N0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cpm::{modulate, on_grid, tilt_frequency, TiltedState, WaveformConfig};
use crate::error::{Error, Result};

/// Discretized receive filter plus decimation layout.
#[derive(Debug, Clone)]
pub struct ReceiveChain {
    /// Filter samples `g((i + 1) dt) * dt`; tap `i` weighs the input `i` grid samples back.
    pub taps: Vec<Complex64>,
    /// Filter memory in symbols, `(L_g - 1) Ts < T_g <= L_g Ts`.
    pub l_g: usize,
    pub oversampling: usize,
    pub grid: usize,
    /// Index inside each group of `grid` high-rate samples that survives decimation.
    pub sample_offset: usize,
    pub grid_dt: f64,
    pub ts: f64,
}

/// Default decimation phase: the sample closest to 15/32 of each group of `grid` samples.
pub fn default_sample_offset(grid: u32) -> usize {
    ((15 * grid as usize + 16) / 32).saturating_sub(1)
}

/// Integrate-and-dump style bandpass filter of length `t_g` centred on the tilt frequency.
pub fn build_rx_filter(cfg: &WaveformConfig, t_g: f64) -> Result<ReceiveChain> {
    ReceiveChain::new(cfg, t_g, tilt_frequency(cfg), default_sample_offset(cfg.grid))
}

impl ReceiveChain {
    /// Filter of length `t_g` whose passband is centred on `center_freq`.
    pub fn new(cfg: &WaveformConfig, t_g: f64, center_freq: f64, sample_offset: usize) -> Result<Self> {
        cfg.validate()?;
        let dt = cfg.grid_dt();
        if !(t_g > 0.0) || !on_grid(t_g, dt) {
            return Err(Error::OffGrid { what: "T_g", value: t_g, dt });
        }
        if sample_offset >= cfg.grid as usize {
            return Err(Error::InvalidConfig(format!(
                "sample offset {sample_offset} must be below the grid multiplier {}",
                cfg.grid
            )));
        }
        let n = (t_g / dt).round() as usize;
        let amp = (1.0 / t_g).sqrt() * dt;
        let taps = (1..=n)
            .map(|i| {
                let t = i as f64 * dt;
                Complex64::from_polar(amp, 2.0 * PI * center_freq * (t - t_g / 2.0))
            })
            .collect();
        Ok(Self {
            taps,
            l_g: (t_g / cfg.ts - 1e-9).ceil() as usize,
            oversampling: cfg.oversampling as usize,
            grid: cfg.grid as usize,
            sample_offset,
            grid_dt: dt,
            ts: cfg.ts,
        })
    }

    pub fn with_sample_offset(mut self, offset: usize) -> Result<Self> {
        if offset >= self.grid {
            return Err(Error::InvalidConfig(format!(
                "sample offset {offset} must be below the grid multiplier {}",
                self.grid
            )));
        }
        self.sample_offset = offset;
        Ok(self)
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.oversampling * self.grid
    }

    /// Per-grid-sample complex noise variance for noise density `n0`.
    pub fn sigma_n2_grid(&self, n0: f64) -> f64 {
        n0 / self.grid_dt
    }

    /// `sum |g_i|^2 / dt`, one for a correctly scaled filter.
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|g| g.norm_sqr()).sum::<f64>() / self.grid_dt
    }

    /// Positions of the kept samples inside a window of `eta + 1` symbols.
    pub fn decimation_rows(&self, eta: usize) -> Vec<usize> {
        let spp = self.samples_per_symbol();
        (0..=eta)
            .flat_map(|k| (0..self.oversampling).map(move |m| k * spp + m * self.grid))
            .map(|r| r + self.sample_offset)
            .collect()
    }

    /// Dense decimation operator of shape `M(eta+1) x MD(eta+1)`.
    pub fn decimation_matrix(&self, eta: usize) -> Vec<Vec<f64>> {
        let cols = self.samples_per_symbol() * (eta + 1);
        self.decimation_rows(eta)
            .into_iter()
            .map(|r| (0..cols).map(|c| if c == r { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    /// Dense Toeplitz filter operator of shape `MD(eta+1) x MD(L_g+eta+1)`.
    ///
    /// Column 0 is the oldest input sample reaching output row 0, so the first row
    /// is the time-reversed tap vector followed by zeros.
    pub fn toeplitz(&self, eta: usize) -> Vec<Vec<Complex64>> {
        let spp = self.samples_per_symbol();
        let rows = spp * (eta + 1);
        let cols = spp * (self.l_g + eta + 1);
        let lt = self.taps.len();
        (0..rows)
            .map(|r| {
                (0..cols)
                    .map(|c| {
                        let i = (r + lt) as isize - 1 - c as isize;
                        if (0..lt as isize).contains(&i) {
                            self.taps[i as usize]
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Complex covariance `sigma^2 D G G^H D^T` of the kept noise samples over `eta + 1` symbols.
    pub fn noise_covariance(&self, eta: usize, n0: f64) -> Vec<Vec<Complex64>> {
        let g = self.toeplitz(eta);
        let rows = self.decimation_rows(eta);
        let s2 = self.sigma_n2_grid(n0);
        rows.iter()
            .map(|&a| {
                rows.iter()
                    .map(|&b| {
                        g[a].iter().zip(&g[b]).map(|(x, y)| x * y.conj()).sum::<Complex64>() * s2
                    })
                    .collect()
            })
            .collect()
    }

    /// Symbols by which the simple demodulator's decisions lag the transmit symbols.
    ///
    /// A kept sample whose integration window is centred before mid-symbol mostly
    /// sees the phase reached at the previous boundary.
    pub fn decision_delay(&self) -> usize {
        let t_g = self.taps.len() as f64 * self.grid_dt;
        let centre = (self.sample_offset + 1) as f64 * self.grid_dt - t_g / 2.0;
        usize::from(centre < self.ts / 2.0)
    }
}

/// Filter and decimate `s + noise` as one streaming convolution over the frame,
/// zero-padded before the first sample.
pub fn apply_chain(chain: &ReceiveChain, s: &[Complex64], noise: &[Complex64]) -> Result<Vec<Complex64>> {
    if s.len() != noise.len() {
        return Err(Error::LengthMismatch { left: s.len(), right: noise.len() });
    }
    let spp = chain.samples_per_symbol();
    let n_sym = s.len() / spp;
    let rows = chain.decimation_rows(0);
    let mut z = Vec::with_capacity(n_sym * rows.len());
    for k in 0..n_sym {
        for &r in &rows {
            let n = k * spp + r;
            let acc = chain
                .taps
                .iter()
                .take(n + 1)
                .enumerate()
                .map(|(i, g)| g * (s[n - i] + noise[n - i]))
                .sum();
            z.push(acc);
        }
    }
    Ok(z)
}

/// One quantized complex sample; bit 0 marks a negative real part, bit 1 a negative imaginary part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OneBit(pub u8);

impl OneBit {
    pub fn from_complex(z: Complex64) -> Self {
        Self(u8::from(z.re < 0.0) | (u8::from(z.im < 0.0) << 1))
    }

    pub fn re(self) -> f64 {
        if self.0 & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn im(self) -> f64 {
        if self.0 & 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re(), self.im())
    }
}

/// Quantized receiver output, `oversampling` samples per symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedFrame {
    pub samples: Vec<OneBit>,
    pub n_symbols: usize,
    pub oversampling: usize,
}

impl QuantizedFrame {
    pub fn new(samples: Vec<OneBit>, oversampling: usize) -> Result<Self> {
        if oversampling == 0 || samples.len() % oversampling != 0 {
            return Err(Error::LengthMismatch { left: samples.len(), right: oversampling });
        }
        Ok(Self { n_symbols: samples.len() / oversampling, samples, oversampling })
    }

    /// The `oversampling` samples belonging to symbol `k`.
    pub fn symbol(&self, k: usize) -> &[OneBit] {
        &self.samples[k * self.oversampling..(k + 1) * self.oversampling]
    }
}

/// Element-wise sign quantizer with `sign(0) = +1`.
pub fn quantize_1bit(z: &[Complex64]) -> Vec<OneBit> {
    z.iter().map(|&v| OneBit::from_complex(v)).collect()
}

/// Circular complex white noise with per-sample variance `variance`.
pub fn complex_awgn<R: Rng>(rng: &mut R, len: usize, variance: f64) -> Vec<Complex64> {
    let sd = (variance / 2.0).sqrt();
    (0..len)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(sd * re, sd * im)
        })
        .collect()
}

/// Modulate, add grid-rate noise from `rng`, filter, decimate and quantize.
pub fn simulate_link_with<R: Rng>(
    x: &[u32],
    cfg: &WaveformConfig,
    chain: &ReceiveChain,
    n0: f64,
    rng: &mut R,
) -> Result<QuantizedFrame> {
    let s = modulate(x, cfg, &TiltedState::initial(cfg))?;
    let noise = complex_awgn(rng, s.len(), chain.sigma_n2_grid(n0));
    let z = apply_chain(chain, &s, &noise)?;
    QuantizedFrame::new(quantize_1bit(&z), chain.oversampling)
}

/// [`simulate_link_with`] driven by a fresh generator seeded with `seed`.
pub fn simulate_link(
    x: &[u32],
    cfg: &WaveformConfig,
    chain: &ReceiveChain,
    n0: f64,
    seed: u64,
) -> Result<QuantizedFrame> {
    simulate_link_with(x, cfg, chain, n0, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ftn(grid: u32) -> WaveformConfig {
        WaveformConfig {
            m_cpm: 2,
            k: 1,
            p: 4,
            ts: 1.0,
            t_cpm: 1.0,
            phi0: PI / 4.0,
            n_if: 0.0,
            oversampling: 1,
            grid,
            es: 1.0,
        }
    }

    #[test]
    fn dc_gain_of_flat_filter() {
        let cfg = ftn(8);
        let chain = ReceiveChain::new(&cfg, 1.0, 0.0, 7).unwrap();
        let dt = cfg.grid_dt();
        assert!(chain.taps.iter().all(|g| (g - Complex64::new(dt, 0.0)).norm() < 1e-15));
        let ones = vec![Complex64::new(1.0, 0.0); 32];
        let zero = vec![Complex64::new(0.0, 0.0); 32];
        let z = apply_chain(&chain, &ones, &zero).unwrap();
        assert_relative_eq!(z[2].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_covariance_for_symbol_windows() {
        let chain = build_rx_filter(&ftn(16), 1.0).unwrap();
        let r = chain.noise_covariance(2, 0.7);
        for (a, row) in r.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                if a == b {
                    assert_relative_eq!(v.re, 0.7, max_relative = 1e-12);
                } else {
                    assert!(v.norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn disjoint_half_symbol_windows() {
        let cfg = WaveformConfig { m_cpm: 4, oversampling: 2, ..ftn(8) };
        let chain = build_rx_filter(&cfg, 0.5).unwrap();
        let r = chain.noise_covariance(1, 1.0);
        for (a, row) in r.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                if a != b {
                    assert!(v.norm() < 1e-15, "R[{a}][{b}] = {v}");
                }
            }
        }
    }

    #[test]
    fn toeplitz_layout() {
        let chain = build_rx_filter(&ftn(4), 1.0).unwrap();
        let g = chain.toeplitz(1);
        assert_eq!(g.len(), 8);
        assert_eq!(g[0].len(), 12);
        let rev: Vec<_> = chain.taps.iter().rev().copied().collect();
        assert_eq!(&g[0][..4], &rev[..]);
        assert!(g[0][4..].iter().all(|v| v.norm() == 0.0));
        for r in 1..g.len() {
            assert_eq!(&g[r][1..], &g[r - 1][..g[r].len() - 1]);
        }
    }

    #[test]
    fn off_grid_filter_rejected() {
        assert!(matches!(build_rx_filter(&ftn(8), 0.3), Err(Error::OffGrid { .. })));
    }

    #[test]
    fn passthrough() {
        let chain = ReceiveChain {
            taps: vec![Complex64::new(1.0, 0.0)],
            l_g: 0,
            oversampling: 1,
            grid: 1,
            sample_offset: 0,
            grid_dt: 1.0,
            ts: 1.0,
        };
        let s: Vec<_> = (0..5).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let n: Vec<_> = (0..5).map(|i| Complex64::new(0.5, -(i as f64))).collect();
        let z = apply_chain(&chain, &s, &n).unwrap();
        for i in 0..5 {
            assert_eq!(z[i], s[i] + n[i]);
        }
        assert!(apply_chain(&chain, &s, &n[..4]).is_err());
    }

    #[test]
    fn quantizer_examples() {
        let q = quantize_1bit(&[
            Complex64::new(0.3, -0.2),
            Complex64::new(-5.0, 0.0),
            Complex64::new(1.0, 1e-300),
            Complex64::new(-1e-300, -1.0),
        ]);
        let c: Vec<_> = q.iter().map(|v| v.to_complex()).collect();
        assert_eq!(c[0], Complex64::new(1.0, -1.0));
        assert_eq!(c[1], Complex64::new(-1.0, 1.0));
        assert_eq!(c[2], Complex64::new(1.0, 1.0));
        assert_eq!(c[3], Complex64::new(-1.0, -1.0));
    }

    #[test]
    fn noiseless_zero_crossings_mark_ones() {
        let cfg = ftn(16);
        let chain = build_rx_filter(&cfg, 1.0).unwrap();
        let x = [1, 0, 1, 1, 0, 0, 1, 0];
        let y = simulate_link(&x, &cfg, &chain, 1e-30, 1).unwrap();
        let delay = chain.decision_delay();
        for k in 1..x.len() - delay {
            let changed = y.samples[k + delay] != y.samples[k + delay - 1];
            assert_eq!(changed, x[k] == 1, "symbol {k}");
        }
    }

    #[test]
    fn seeded_link_is_repeatable() {
        let cfg = ftn(8);
        let chain = build_rx_filter(&cfg, 1.0).unwrap();
        let x: Vec<u32> = (0..200).map(|i| (i * 7 % 3 % 2) as u32).collect();
        let a = simulate_link(&x, &cfg, &chain, 0.3, 11).unwrap();
        let b = simulate_link(&x, &cfg, &chain, 0.3, 11).unwrap();
        assert_eq!(a, b);
    }
}
