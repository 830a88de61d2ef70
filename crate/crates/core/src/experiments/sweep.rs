//! Seeded Monte Carlo sweeps and the bandwidth table.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{BandwidthReference, DetectorKind, ExperimentSpec, Waveform, WaveformSection};
use crate::cpm::WaveformConfig;
use crate::detection::{
    bcjr_detect, build_trellis, estimate_information_rate, simple_demodulate, BranchMetrics, Trellis,
    DEFAULT_PROB_FLOOR,
};
use crate::error::Result;
use crate::frontend::{simulate_link_with, OneBit, ReceiveChain};
use crate::rng::{point_stream, stream_rng};
use crate::spectrum::{estimate_psd, snr_to_noise_density, BandwidthReport, PsdEstimate, WelchParams};

/// Why a sweep point stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MinErrors,
    MaxSymbols,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub n0: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub symbols: u64,
    pub ber: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub stop: StopReason,
    pub underflow: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub snr_db: f64,
    pub n0: f64,
    pub bits_per_symbol: f64,
    pub spectral_efficiency: f64,
    pub symbols: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub spec_hash: String,
    pub seed: u64,
    pub code_version: String,
    pub waveform: Waveform,
    /// Bandwidth times Ts used to convert SNR to noise density.
    pub reference_b90_ts: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub metadata: Metadata,
    pub detector: DetectorKind,
    pub points: Vec<BerPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub metadata: Metadata,
    pub points: Vec<RatePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthRow {
    pub waveform: String,
    pub oversampling: u32,
    pub report: BandwidthReport,
}

/// Two-sided 95% Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = n as f64;
    let p = k as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

/// Hex SHA-256 of the experiment file's canonical JSON form.
pub fn spec_hash(spec: &ExperimentSpec) -> Result<String> {
    let digest = Sha256::digest(serde_json::to_vec(spec)?);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// PSD grid: one kept sample per symbol and 32 (or 40) grid samples.
pub fn spectrum_config(cfg: &WaveformConfig) -> WaveformConfig {
    let mut c = WaveformConfig { oversampling: 1, grid: 32, ..cfg.clone() };
    if c.validate().is_err() {
        c.grid = 40;
    }
    c
}

pub fn estimate_waveform_psd(w: &Waveform, spec: &ExperimentSpec) -> Result<PsdEstimate> {
    let b = &spec.bandwidth;
    estimate_psd(
        &spectrum_config(&w.cfg),
        b.n_symbols,
        spec.seed,
        WelchParams { segment: b.segment, overlap: b.overlap },
    )
}

/// Bandwidth times Ts used for the SNR axis.
pub fn reference_bandwidth(w: &Waveform, spec: &ExperimentSpec) -> Result<f64> {
    match (spec.bandwidth.reference, w.table_b90_ts) {
        (BandwidthReference::Table, Some(b)) => Ok(b),
        _ => Ok(BandwidthReport::from_psd(&estimate_waveform_psd(w, spec)?, &w.cfg)?.b90_ts),
    }
}

fn metadata(spec: &ExperimentSpec, w: &Waveform, b90_ts: f64) -> Result<Metadata> {
    Ok(Metadata {
        spec_hash: spec_hash(spec)?,
        seed: spec.seed,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        waveform: w.clone(),
        reference_b90_ts: b90_ts,
        wall_time_s: None,
    })
}

/// Receive chain with the waveform's filter and decimation phase.
pub fn receive_chain(w: &Waveform) -> Result<ReceiveChain> {
    crate::frontend::build_rx_filter(&w.cfg, w.t_g)?.with_sample_offset(w.sample_offset)
}

/// Bit errors and bits counted in one frame.
#[derive(Debug, Clone, Copy, Default)]
struct FrameTally {
    errors: u64,
    bits: u64,
    symbols: u64,
}

struct Link<'a> {
    w: &'a Waveform,
    chain: &'a ReceiveChain,
    trellis: &'a Trellis,
    kind: DetectorKind,
}

impl Link<'_> {
    fn frame(&self, metrics: &BranchMetrics, n: usize, seed: u64, stream: u64) -> Result<FrameTally> {
        let cfg = &self.w.cfg;
        let mut rng = stream_rng(seed, stream);
        let x: Vec<u32> = (0..n).map(|_| rng.gen_range(0..cfg.m_cpm)).collect();
        let y = simulate_link_with(&x, cfg, self.chain, metrics.n0, &mut rng)?;
        // The last symbols of a frame are only partly observed, so both ends are skipped.
        let warm = self.trellis.warm_up();
        let counted = n.saturating_sub(warm + self.trellis.channel_memory);
        let decisions: Vec<u32> = match self.kind {
            DetectorKind::Bcjr => bcjr_detect(&y, metrics, None)?.decisions,
            DetectorKind::Simple => {
                let initial = OneBit::from_complex(num_complex::Complex64::from_polar(1.0, cfg.phi0));
                let d = simple_demodulate(&y, initial)?;
                d.into_iter().skip(self.chain.decision_delay()).collect()
            }
        };
        let pairs: Vec<(u32, u32)> = x.iter().copied().zip(decisions).skip(warm).take(counted).collect();
        let bits_per_symbol = cfg.m_cpm.trailing_zeros() as u64;
        let errors = pairs
            .iter()
            .map(|&(a, b)| (self.w.bit_mapping.label(a) ^ self.w.bit_mapping.label(b)).count_ones() as u64)
            .sum();
        Ok(FrameTally { errors, bits: pairs.len() as u64 * bits_per_symbol, symbols: n as u64 })
    }
}

/// BER per SNR point, frames drawn until `min_errors` or `max_symbols`.
///
/// Frames are simulated in parallel batches but tallied in frame order, so the
/// stopping frame and every count are independent of scheduling.
pub fn run_ber_sweep(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let w = spec.validate()?;
    let b90 = reference_bandwidth(&w, spec)?;
    let chain = receive_chain(&w)?;
    let trellis = build_trellis(&w.cfg, &chain, spec.detector.aux_memory)?;
    let link = Link { w: &w, chain: &chain, trellis: &trellis, kind: spec.detector.kind };
    let sweep = &spec.sweep;
    let batch = rayon::current_num_threads().max(1) * 2;
    let mut points = Vec::with_capacity(sweep.snr_db.len());
    for (i, &snr) in sweep.snr_db.iter().enumerate() {
        let n0 = snr_to_noise_density(snr, w.cfg.es, w.cfg.ts, b90);
        let metrics = BranchMetrics::new(&trellis, n0, spec.orthant_settings(), DEFAULT_PROB_FLOOR)?;
        let mut total = FrameTally::default();
        let mut frame = 0usize;
        let stop = 'outer: loop {
            let lens: Vec<usize> = (0..batch)
                .map(|j| {
                    let start = (frame + j) as u64 * sweep.frame_symbols as u64;
                    sweep.max_symbols.saturating_sub(start).min(sweep.frame_symbols as u64) as usize
                })
                .take_while(|&n| n > 0)
                .collect();
            let tallies = lens
                .par_iter()
                .enumerate()
                .map(|(j, &n)| link.frame(&metrics, n, spec.seed, point_stream(i, frame + j)))
                .collect::<Result<Vec<_>>>()?;
            for t in tallies {
                frame += 1;
                total.errors += t.errors;
                total.bits += t.bits;
                total.symbols += t.symbols;
                if total.errors >= sweep.min_errors {
                    break 'outer StopReason::MinErrors;
                }
                if total.symbols >= sweep.max_symbols {
                    break 'outer StopReason::MaxSymbols;
                }
            }
        };
        let (ci_lo, ci_hi) = wilson_interval(total.errors, total.bits);
        points.push(BerPoint {
            snr_db: snr,
            n0,
            bit_errors: total.errors,
            bits: total.bits,
            symbols: total.symbols,
            ber: if total.bits > 0 { total.errors as f64 / total.bits as f64 } else { 0.0 },
            ci_lo,
            ci_hi,
            stop,
            underflow: metrics.underflowed(),
        });
    }
    Ok(ExperimentResult { metadata: metadata(spec, &w, b90)?, detector: spec.detector.kind, points })
}

/// Information rate and spectral efficiency per SNR point.
pub fn run_rate_sweep(spec: &ExperimentSpec) -> Result<RateResult> {
    let w = spec.validate()?;
    let b90 = reference_bandwidth(&w, spec)?;
    let chain = receive_chain(&w)?;
    let trellis = build_trellis(&w.cfg, &chain, spec.detector.aux_memory)?;
    let points = spec
        .sweep
        .snr_db
        .iter()
        .enumerate()
        .map(|(i, &snr)| {
            let n0 = snr_to_noise_density(snr, w.cfg.es, w.cfg.ts, b90);
            let metrics = BranchMetrics::new(&trellis, n0, spec.orthant_settings(), DEFAULT_PROB_FLOOR)?;
            let seed = spec.seed ^ point_stream(i + 1, 0);
            let r = estimate_information_rate(&w.cfg, &chain, &metrics, spec.sweep.rate_symbols, seed)?;
            Ok(RatePoint {
                snr_db: snr,
                n0,
                bits_per_symbol: r.bits_per_symbol,
                spectral_efficiency: crate::spectrum::spectral_efficiency(r.bits_per_symbol, b90, w.cfg.ts),
                symbols: r.symbols as u64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateResult { metadata: metadata(spec, &w, b90)?, points })
}

/// Containment bandwidths for each waveform, using the experiment's PSD settings.
pub fn run_bandwidth_table(rows: &[WaveformSection], spec: &ExperimentSpec) -> Result<Vec<BandwidthRow>> {
    rows.par_iter()
        .map(|section| {
            let w = section.resolve()?;
            let psd = estimate_waveform_psd(&w, spec)?;
            Ok(BandwidthRow {
                waveform: w.name.clone(),
                oversampling: w.cfg.oversampling,
                report: BandwidthReport::from_psd(&psd, &w.cfg)?,
            })
        })
        .collect()
}
