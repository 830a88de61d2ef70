//! Extended trellis over `(beta, recent symbols)` with noise-free branch means.

use num_complex::Complex64;

use crate::cpm::{modulate_state_sequence, TiltedState, WaveformConfig};
use crate::error::{Error, Result};
use crate::frontend::{apply_chain, ReceiveChain};

/// Default cap on the number of trellis branches.
pub const DEFAULT_BRANCH_CAP: u64 = 1_000_000;

/// State/branch indexing of the extended trellis.
///
/// A state holds `beta` and `memory` symbols; a branch appends the newest symbol.
/// Branch `b` leaves state `b / m_cpm` and carries symbol `b % m_cpm`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrellisLayout {
    pub m_cpm: u32,
    pub p: u32,
    pub k: u32,
    pub if_shift: u32,
    /// Symbols stored in a state, `L + N - 1`.
    pub memory: usize,
}

impl TrellisLayout {
    pub fn n_states(&self) -> usize {
        self.p as usize * (self.m_cpm as usize).pow(self.memory as u32)
    }

    pub fn n_branches(&self) -> usize {
        self.n_states() * self.m_cpm as usize
    }

    /// `(beta, symbols oldest first)` of a branch.
    pub fn branch_digits(&self, b: usize) -> (u32, Vec<u32>) {
        let m = self.m_cpm as usize;
        let span = m.pow(self.memory as u32 + 1);
        let mut rest = b % span;
        let mut digits = vec![0; self.memory + 1];
        for d in digits.iter_mut().rev() {
            *d = (rest % m) as u32;
            rest /= m;
        }
        ((b / span) as u32, digits)
    }

    pub fn from_state(&self, b: usize) -> usize {
        b / self.m_cpm as usize
    }

    pub fn symbol(&self, b: usize) -> u32 {
        (b % self.m_cpm as usize) as u32
    }

    pub fn to_state(&self, b: usize) -> usize {
        let (beta, digits) = self.branch_digits(b);
        let span = (self.m_cpm as usize).pow(self.memory as u32);
        let beta = (beta + self.k * digits[0] + self.if_shift) % self.p;
        beta as usize * span + b % span
    }

    pub fn branch(&self, from: usize, x: u32) -> usize {
        from * self.m_cpm as usize + x as usize
    }
}

/// One trellis branch with its noise-free receiver output.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub symbol: u32,
    /// Kept samples over the `N + 1` most recent symbols, oldest first.
    pub mean: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct Trellis {
    pub layout: TrellisLayout,
    pub branches: Vec<Branch>,
    /// Auxiliary memory depth `N`.
    pub aux_memory: usize,
    /// `L = L_cpm + L_g`.
    pub channel_memory: usize,
    pub oversampling: usize,
    /// Complex noise covariance of one branch window at `N0 = 1`.
    pub unit_cov: Vec<Vec<Complex64>>,
    /// Lattice steps per quarter turn, when the phase lattice contains one.
    pub quarter_turn: Option<u32>,
}

/// Enumerate all states and branches and precompute branch means.
pub fn build_trellis(cfg: &WaveformConfig, chain: &ReceiveChain, aux_memory: usize) -> Result<Trellis> {
    build_trellis_capped(cfg, chain, aux_memory, DEFAULT_BRANCH_CAP)
}

pub fn build_trellis_capped(
    cfg: &WaveformConfig,
    chain: &ReceiveChain,
    aux_memory: usize,
    cap: u64,
) -> Result<Trellis> {
    cfg.validate()?;
    if chain.samples_per_symbol() != cfg.samples_per_symbol() {
        return Err(Error::InvalidConfig("receive chain grid differs from waveform grid".into()));
    }
    let l_cpm = cfg.l_cpm();
    let channel_memory = l_cpm + chain.l_g;
    let memory = channel_memory + aux_memory - 1;
    let count = (cfg.p as u64).saturating_mul((cfg.m_cpm as u64).saturating_pow(memory as u32 + 1));
    if count > cap {
        return Err(Error::ResourceCap {
            branches: count,
            cap,
            context: format!(
                "M_cpm={} P={} L_cpm={} L_g={} N={}",
                cfg.m_cpm, cfg.p, l_cpm, chain.l_g, aux_memory
            ),
        });
    }
    let layout = TrellisLayout {
        m_cpm: cfg.m_cpm,
        p: cfg.p,
        k: cfg.k,
        if_shift: cfg.if_shift(),
        memory,
    };
    let kept = chain.oversampling * (aux_memory + 1);
    let branches = (0..layout.n_branches())
        .map(|b| {
            let (beta, digits) = layout.branch_digits(b);
            let start = TiltedState { beta, recent: digits[..l_cpm].to_vec() };
            let s = modulate_state_sequence(&start, &digits[l_cpm..], cfg)?;
            let zero = vec![Complex64::new(0.0, 0.0); s.len()];
            let z = apply_chain(chain, &s, &zero)?;
            Ok(Branch {
                from: layout.from_state(b),
                to: layout.to_state(b),
                symbol: layout.symbol(b),
                mean: z[z.len() - kept..].to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let quarter_turn = (cfg.p % 4 == 0).then_some(cfg.p / 4);
    Ok(Trellis {
        layout,
        branches,
        aux_memory,
        channel_memory,
        oversampling: chain.oversampling,
        unit_cov: chain.noise_covariance(aux_memory, 1.0),
        quarter_turn,
    })
}

impl Trellis {
    /// Quantized samples in one branch window.
    pub fn window_len(&self) -> usize {
        self.oversampling * (self.aux_memory + 1)
    }

    /// Symbols discarded at the start of every frame.
    pub fn warm_up(&self) -> usize {
        self.channel_memory + self.aux_memory
    }

    /// Real covariance of the interleaved `(Re, Im)` window at noise density `n0`.
    pub fn real_cov(&self, n0: f64) -> Vec<Vec<f64>> {
        let n = self.unit_cov.len();
        let mut c = vec![vec![0.0; 2 * n]; 2 * n];
        for a in 0..n {
            for b in 0..n {
                let r = self.unit_cov[a][b] * (0.5 * n0);
                c[2 * a][2 * b] = r.re;
                c[2 * a + 1][2 * b + 1] = r.re;
                c[2 * a][2 * b + 1] = -r.im;
                c[2 * a + 1][2 * b] = r.im;
            }
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::build_rx_filter;
    use std::f64::consts::PI;

    fn ftn(t_cpm: f64) -> WaveformConfig {
        WaveformConfig {
            m_cpm: 2,
            k: 1,
            p: 4,
            ts: 1.0,
            t_cpm,
            phi0: PI / 4.0,
            n_if: 0.0,
            oversampling: 1,
            grid: 8,
            es: 1.0,
        }
    }

    #[test]
    fn ftn_two_symbol_pulse_counts() {
        let cfg = ftn(2.0);
        let t = build_trellis(&cfg, &build_rx_filter(&cfg, 1.0).unwrap(), 0).unwrap();
        assert_eq!(t.layout.n_states(), 16);
        assert_eq!(t.branches.len(), 32);
    }

    #[test]
    fn msk_like_layout_has_two_states() {
        let layout = TrellisLayout { m_cpm: 2, p: 2, k: 1, if_shift: 0, memory: 0 };
        assert_eq!(layout.n_states(), 2);
        assert_eq!(layout.to_state(layout.branch(0, 1)), 1);
        assert_eq!(layout.to_state(layout.branch(1, 1)), 0);
    }

    #[test]
    fn four_ary_counts() {
        let cfg = WaveformConfig { m_cpm: 4, oversampling: 2, ..ftn(1.0) };
        let t = build_trellis(&cfg, &build_rx_filter(&cfg, 0.5).unwrap(), 0).unwrap();
        assert_eq!(t.layout.n_states(), 16);
    }

    #[test]
    fn every_state_has_full_fan_in_and_out() {
        let cfg = ftn(2.0);
        let t = build_trellis(&cfg, &build_rx_filter(&cfg, 1.0).unwrap(), 1).unwrap();
        let s = t.layout.n_states();
        let mut fan_in = vec![0; s];
        let mut fan_out = vec![0; s];
        for b in &t.branches {
            fan_out[b.from] += 1;
            fan_in[b.to] += 1;
        }
        assert!(fan_in.iter().chain(&fan_out).all(|&c| c == 2));
    }

    #[test]
    fn cap_is_enforced() {
        let cfg = ftn(2.0);
        let chain = build_rx_filter(&cfg, 1.0).unwrap();
        let err = build_trellis_capped(&cfg, &chain, 3, 100).unwrap_err();
        assert!(matches!(err, Error::ResourceCap { branches: 256, .. }));
    }
}
