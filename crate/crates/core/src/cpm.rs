//! Tilted CPM waveform generation on a discrete sample grid and Carson
//! bandwidth algebra.
//!
//! The phase is generated through the tilted (time-invariant) decomposition:
//! a phase state `beta` in `0..P` plus the last `L_cpm` symbols from the
//! alphabet `0..M_cpm`. Only the rectangular frequency pulse is supported.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GRID_TOL: f64 = 1e-9;

/// All transmit-side parameters plus the receiver sample grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformConfig {
    /// Alphabet size of the CPM symbols.
    pub m_cpm: u32,
    /// Modulation index numerator.
    pub k: u32,
    /// Modulation index denominator.
    pub p: u32,
    /// Symbol duration.
    pub ts: f64,
    /// Frequency pulse duration.
    pub t_cpm: f64,
    /// Phase offset in radians.
    pub phi0: f64,
    /// Low-IF offset in cycles per symbol.
    pub n_if: f64,
    /// Quantized samples kept per symbol.
    pub oversampling: u32,
    /// Grid multiplier; the high-rate grid carries `oversampling * grid` samples per symbol.
    pub grid: u32,
    /// Symbol energy.
    pub es: f64,
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// True when `value` is an integer multiple of `dt` up to rounding noise.
pub(crate) fn on_grid(value: f64, dt: f64) -> bool {
    let r = value / dt;
    (r - r.round()).abs() < GRID_TOL * r.abs().max(1.0)
}

impl WaveformConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.m_cpm < 2 || self.m_cpm % 2 != 0 {
            return bad("M_cpm must be even and at least 2");
        }
        if self.k == 0 || self.p == 0 || gcd(self.k, self.p) != 1 {
            return bad("K and P must be coprime positive integers");
        }
        if self.oversampling == 0 || self.grid == 0 {
            return bad("oversampling and grid multiplier must be at least 1");
        }
        if !(self.ts > 0.0 && self.t_cpm > 0.0 && self.es > 0.0) {
            return bad("Ts, T_cpm and Es must be positive");
        }
        if !self.phi0.is_finite() || !self.n_if.is_finite() {
            return bad("phi0 and n_IF must be finite");
        }
        if !on_grid(self.t_cpm, self.grid_dt()) {
            return Err(Error::OffGrid {
                what: "T_cpm",
                value: self.t_cpm,
                dt: self.grid_dt(),
            });
        }
        let shift = self.n_if * self.p as f64;
        if (shift - shift.round()).abs() > GRID_TOL {
            return bad("n_IF * P must be an integer so the low-IF rotation stays on the phase lattice");
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.k as f64 / self.p as f64
    }

    /// Pulse memory in symbols.
    pub fn l_cpm(&self) -> usize {
        (self.t_cpm / self.ts - GRID_TOL).ceil().max(1.0) as usize
    }

    /// High-rate samples per symbol.
    pub fn samples_per_symbol(&self) -> usize {
        (self.oversampling * self.grid) as usize
    }

    pub fn grid_dt(&self) -> f64 {
        self.ts / self.samples_per_symbol() as f64
    }

    /// Phase-lattice steps added to `beta` per symbol by the low-IF rotation.
    pub fn if_shift(&self) -> u32 {
        (self.n_if * self.p as f64).round().rem_euclid(self.p as f64) as u32
    }

    pub fn amplitude(&self) -> f64 {
        (self.es / self.ts).sqrt()
    }

    pub fn check_symbol(&self, x: u32) -> Result<()> {
        if x < self.m_cpm {
            Ok(())
        } else {
            Err(Error::InvalidSymbol {
                symbol: x,
                alphabet: self.m_cpm,
            })
        }
    }
}

/// Phase state of the tilted modulator: `beta` and the last `L_cpm` symbols, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TiltedState {
    pub beta: u32,
    pub recent: Vec<u32>,
}

impl TiltedState {
    /// The documented start state: `beta = 0` and an all-zero history.
    pub fn initial(cfg: &WaveformConfig) -> Self {
        Self {
            beta: 0,
            recent: vec![0; cfg.l_cpm()],
        }
    }
}

/// Unwrapped tilted phase on the high-rate grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFrame {
    pub samples: Vec<f64>,
    pub n_symbols: usize,
    pub grid_dt: f64,
}

/// Integrated rectangular frequency pulse.
pub fn phase_response(tau: f64, t_cpm: f64) -> f64 {
    (tau / (2.0 * t_cpm)).clamp(0.0, 0.5)
}

/// Frequency offset of the tilted signal including the low-IF shift.
pub fn tilt_frequency(cfg: &WaveformConfig) -> f64 {
    cfg.h() * (cfg.m_cpm - 1) as f64 / (2.0 * cfg.ts) + cfg.n_if / cfg.ts
}

/// Phase samples over one symbol interval for `state`.
///
/// Sample `j` sits at `(j + 1) * dt` after the symbol boundary.
pub fn tilted_phase_symbol(state: &TiltedState, cfg: &WaveformConfig) -> Result<Vec<f64>> {
    let l_cpm = cfg.l_cpm();
    if state.recent.len() != l_cpm {
        return Err(Error::StateLength {
            got: state.recent.len(),
            expected: l_cpm,
        });
    }
    let h = cfg.h();
    let m1 = (cfg.m_cpm - 1) as f64;
    let base = 2.0 * PI * state.beta as f64 / cfg.p as f64 + cfg.phi0;
    let dt = cfg.grid_dt();
    let out = (0..cfg.samples_per_symbol())
        .map(|j| {
            let tau = (j + 1) as f64 * dt;
            let pulses: f64 = state
                .recent
                .iter()
                .rev()
                .enumerate()
                .map(|(l, &x)| {
                    (2.0 * x as f64 - m1) * phase_response(tau + l as f64 * cfg.ts, cfg.t_cpm)
                })
                .sum();
            base + 2.0 * PI * h * pulses
                + PI * h * m1 * (tau / cfg.ts + l_cpm as f64 - 1.0)
                + 2.0 * PI * cfg.n_if * tau / cfg.ts
        })
        .collect();
    Ok(out)
}

/// Shift in `x_next`, folding the oldest symbol (and the low-IF step) into `beta`.
pub fn state_transition(state: &TiltedState, x_next: u32, cfg: &WaveformConfig) -> Result<TiltedState> {
    cfg.check_symbol(x_next)?;
    let (old, rest) = state
        .recent
        .split_first()
        .ok_or(Error::StateLength { got: 0, expected: cfg.l_cpm() })?;
    let beta = (state.beta + cfg.k * old + cfg.if_shift()) % cfg.p;
    let mut recent = rest.to_vec();
    recent.push(x_next);
    Ok(TiltedState { beta, recent })
}

/// Unwrapped phase trajectory for `x` starting from `init`.
pub fn modulate_phase(x: &[u32], cfg: &WaveformConfig, init: &TiltedState) -> Result<PhaseFrame> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut state = init.clone();
    // Lattice steps accumulated without the modulo, so the trajectory never wraps.
    let mut unwrapped = init.beta as u64;
    let mut samples = Vec::with_capacity(x.len() * cfg.samples_per_symbol());
    for &xk in x {
        unwrapped += (cfg.k * state.recent[0] + cfg.if_shift()) as u64;
        state = state_transition(&state, xk, cfg)?;
        let turns = (unwrapped - state.beta as u64) as f64 / cfg.p as f64;
        let offset = 2.0 * PI * turns;
        samples.extend(tilted_phase_symbol(&state, cfg)?.into_iter().map(|v| v + offset));
    }
    Ok(PhaseFrame {
        samples,
        n_symbols: x.len(),
        grid_dt: cfg.grid_dt(),
    })
}

/// Complex baseband samples `sqrt(Es/Ts) * exp(j psi)` for `x`, starting from `init`.
pub fn modulate(x: &[u32], cfg: &WaveformConfig, init: &TiltedState) -> Result<Vec<Complex64>> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let amp = cfg.amplitude();
    let mut state = init.clone();
    let mut out = Vec::with_capacity(x.len() * cfg.samples_per_symbol());
    for &xk in x {
        state = state_transition(&state, xk, cfg)?;
        // The wrapped phase keeps the exponent small and exact.
        out.extend(
            tilted_phase_symbol(&state, cfg)?
                .into_iter()
                .map(|psi| Complex64::from_polar(amp, psi)),
        );
    }
    Ok(out)
}

/// Samples for the interval of `start` followed by one interval per symbol in `next`.
pub fn modulate_state_sequence(
    start: &TiltedState,
    next: &[u32],
    cfg: &WaveformConfig,
) -> Result<Vec<Complex64>> {
    let amp = cfg.amplitude();
    let mut state = start.clone();
    let mut out = Vec::with_capacity((next.len() + 1) * cfg.samples_per_symbol());
    for i in 0..=next.len() {
        if i > 0 {
            state = state_transition(&state, next[i - 1], cfg)?;
        }
        out.extend(
            tilted_phase_symbol(&state, cfg)?
                .into_iter()
                .map(|psi| Complex64::from_polar(amp, psi)),
        );
    }
    Ok(out)
}

/// Base-`m_cpm` digits of `x_prime`, most significant first.
pub fn ftn_recode(x_prime: u32, ratio: u32, m_cpm: u32) -> Result<Vec<u32>> {
    let span = (m_cpm as u64).pow(ratio);
    if m_cpm < 2 || x_prime as u64 >= span {
        return Err(Error::InvalidSymbol {
            symbol: x_prime,
            alphabet: span.min(u32::MAX as u64) as u32,
        });
    }
    let mut digits = vec![0; ratio as usize];
    let mut v = x_prime;
    for d in digits.iter_mut().rev() {
        *d = v % m_cpm;
        v /= m_cpm;
    }
    Ok(digits)
}

/// Inverse of [`ftn_recode`].
pub fn ftn_assemble(digits: &[u32], m_cpm: u32) -> u32 {
    digits.iter().fold(0, |acc, &d| acc * m_cpm + d)
}

/// Carson bandwidth for i.u.d. input and a rectangular frequency pulse.
pub fn carson_bandwidth(h: f64, m_cpm: u32, ts: f64, t_cpm: f64) -> f64 {
    let m = m_cpm as f64;
    h * ((m * m - 1.0) / (3.0 * ts * t_cpm)).sqrt() + 1.0 / t_cpm
}

/// Carson bandwidth of the FTN waveform relative to the CPFSK reference that carries
/// the same information per unit time (`M_cpm' = M_cpm^ratio`, `h' = 1/M_cpm'`).
pub fn relative_carson_ratio(h: f64, m_cpm: u32, t_cpm_over_ts: f64, ratio: u32) -> f64 {
    let m = m_cpm as f64;
    let r = ratio as f64;
    let ftn = h * ((m * m - 1.0) / (3.0 * t_cpm_over_ts)).sqrt() + 1.0 / t_cpm_over_ts;
    let m_ref = m.powf(r);
    let reference = 1.0 + ((m_ref * m_ref - 1.0) / 3.0).sqrt() / m_ref;
    r * ftn / reference
}
