//! Experiment files and the waveform presets.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cpm::{on_grid, WaveformConfig};
use crate::detection::OrthantSettings;
use crate::error::{Error, Result};
use crate::frontend::default_sample_offset;

/// Symbol-to-bit labelling used when counting bit errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BitMapping {
    Gray,
    Natural,
}

impl BitMapping {
    pub fn label(self, x: u32) -> u32 {
        match self {
            BitMapping::Gray => x ^ (x >> 1),
            BitMapping::Natural => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Bcjr,
    Simple,
}

/// Which containment bandwidth converts SNR to noise density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthReference {
    /// The published 90% bandwidth of the preset.
    Table,
    /// The bandwidth estimated from the simulated spectrum.
    Estimated,
}

/// `[waveform]` table: a preset name and/or explicit values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_cpm: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    /// Pulse length in symbol durations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_cpm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_if: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oversampling: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<u32>,
    /// Receive filter length in symbol durations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_offset: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bit_mapping: Option<BitMapping>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub es: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub kind: DetectorKind,
    #[serde(default)]
    pub aux_memory: usize,
    #[serde(default = "default_tol")]
    pub orthant_tol: f64,
    #[serde(default = "default_max_points")]
    pub orthant_max_points: usize,
}

fn default_tol() -> f64 {
    OrthantSettings::default().tol
}

fn default_max_points() -> usize {
    OrthantSettings::default().max_points
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            kind: DetectorKind::Bcjr,
            aux_memory: 0,
            orthant_tol: default_tol(),
            orthant_max_points: default_max_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub snr_db: Vec<f64>,
    #[serde(default = "default_frame")]
    pub frame_symbols: usize,
    #[serde(default = "default_min_errors")]
    pub min_errors: u64,
    #[serde(default = "default_max_symbols")]
    pub max_symbols: u64,
    #[serde(default = "default_rate_symbols")]
    pub rate_symbols: usize,
}

fn default_frame() -> usize {
    10_000
}
fn default_min_errors() -> u64 {
    200
}
fn default_max_symbols() -> u64 {
    10_000_000
}
fn default_rate_symbols() -> usize {
    100_000
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            snr_db: Vec::new(),
            frame_symbols: default_frame(),
            min_errors: default_min_errors(),
            max_symbols: default_max_symbols(),
            rate_symbols: default_rate_symbols(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthSection {
    #[serde(default = "default_reference")]
    pub reference: BandwidthReference,
    #[serde(default = "default_psd_symbols")]
    pub n_symbols: usize,
    #[serde(default = "default_segment")]
    pub segment: usize,
    #[serde(default = "default_overlap")]
    pub overlap: f64,
}

fn default_reference() -> BandwidthReference {
    BandwidthReference::Table
}
fn default_psd_symbols() -> usize {
    1 << 16
}
fn default_segment() -> usize {
    1 << 14
}
fn default_overlap() -> f64 {
    0.5
}

impl Default for BandwidthSection {
    fn default() -> Self {
        Self {
            reference: default_reference(),
            n_symbols: default_psd_symbols(),
            segment: default_segment(),
            overlap: default_overlap(),
        }
    }
}

/// One experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub seed: u64,
    pub waveform: WaveformSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub bandwidth: BandwidthSection,
}

/// Fully resolved waveform plus receiver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub name: String,
    pub cfg: WaveformConfig,
    pub t_g: f64,
    pub sample_offset: usize,
    pub bit_mapping: BitMapping,
    /// Published 90% bandwidth times Ts, when the preset has one.
    pub table_b90_ts: Option<f64>,
}

/// Published `log2(M_cpm) / (B90 Ts)` of the FTN presets, keyed by pulse length.
const FTN_TABLE: [(f64, f64); 6] = [
    (1.0, 2.853),
    (1.2, 3.079),
    (1.4, 3.297),
    (1.6, 3.507),
    (1.8, 3.691),
    (2.0, 3.891),
];

/// Fixed parameters of a named preset.
struct Preset {
    m_cpm: u32,
    k: u32,
    p: u32,
    t_g: f64,
    n_if: f64,
    phi0: f64,
    oversampling: &'static [u32],
    eff90: Option<f64>,
    mapping: BitMapping,
}

fn preset(name: &str, t_cpm: f64) -> Result<Preset> {
    match name {
        "4-CPFSK" => Ok(Preset {
            m_cpm: 4,
            k: 1,
            p: 4,
            t_g: 0.5,
            n_if: 0.0,
            phi0: PI / 4.0,
            oversampling: &[4, 2],
            eff90: Some(2.372),
            mapping: BitMapping::Gray,
        }),
        "8-CPFSK" => Ok(Preset {
            m_cpm: 8,
            k: 1,
            p: 8,
            t_g: 0.5,
            n_if: 0.25,
            phi0: PI / 8.0,
            oversampling: &[5],
            eff90: Some(3.467),
            mapping: BitMapping::Gray,
        }),
        "FTN-CPM" => Ok(Preset {
            m_cpm: 2,
            k: 1,
            p: 4,
            t_g: 1.0,
            n_if: 0.0,
            phi0: PI / 4.0,
            oversampling: &[1],
            eff90: FTN_TABLE.iter().find(|(t, _)| (t - t_cpm).abs() < 1e-9).map(|(_, e)| *e),
            mapping: BitMapping::Gray,
        }),
        other => Err(Error::InvalidConfig(format!(
            "unknown preset {other:?}; expected 4-CPFSK, 8-CPFSK or FTN-CPM"
        ))),
    }
}

/// Smallest grid multiplier, a multiple of 32, that keeps the pulse and the filter on the grid.
fn default_grid(oversampling: u32, t_cpm: f64, t_g: f64) -> u32 {
    (1..=16u32)
        .map(|i| 32 * i)
        .find(|&d| {
            let dt = 1.0 / (d * oversampling) as f64;
            on_grid(t_cpm, dt) && on_grid(t_g, dt)
        })
        .unwrap_or(32)
}

fn fixed<T: PartialEq + std::fmt::Debug>(field: &str, given: Option<T>, value: T) -> Result<T> {
    match given {
        Some(v) if v != value => Err(Error::InvalidConfig(format!(
            "{field} = {v:?} conflicts with the preset value {value:?}"
        ))),
        _ => Ok(value),
    }
}

fn required<T>(field: &str, v: Option<T>) -> Result<T> {
    v.ok_or_else(|| Error::InvalidConfig(format!("waveform.{field} is required without a preset")))
}

impl WaveformSection {
    pub fn preset(name: &str) -> Self {
        Self { preset: Some(name.to_string()), ..Self::default() }
    }

    /// Expand the preset (if any) and validate the result.
    pub fn resolve(&self) -> Result<Waveform> {
        let es = self.es.unwrap_or(1.0);
        let (name, cfg, t_g, mapping, table) = match &self.preset {
            Some(name) => {
                let t_cpm = self.t_cpm.unwrap_or(1.0);
                let pr = preset(name, t_cpm)?;
                if name != "FTN-CPM" {
                    fixed("t_cpm", self.t_cpm, 1.0)?;
                }
                let oversampling = self.oversampling.unwrap_or(pr.oversampling[0]);
                if !pr.oversampling.contains(&oversampling) {
                    return Err(Error::InvalidConfig(format!(
                        "{name} is defined for oversampling {:?}, got {oversampling}",
                        pr.oversampling
                    )));
                }
                let t_g = fixed("t_g", self.t_g, pr.t_g)?;
                let cfg = WaveformConfig {
                    m_cpm: fixed("m_cpm", self.m_cpm, pr.m_cpm)?,
                    k: fixed("k", self.k, pr.k)?,
                    p: fixed("p", self.p, pr.p)?,
                    ts: 1.0,
                    t_cpm,
                    phi0: fixed("phi0", self.phi0, pr.phi0)?,
                    n_if: fixed("n_if", self.n_if, pr.n_if)?,
                    oversampling,
                    grid: self.grid.unwrap_or_else(|| default_grid(oversampling, t_cpm, t_g)),
                    es,
                };
                let label = if name == "FTN-CPM" {
                    format!("FTN-CPM T_cpm={t_cpm}Ts")
                } else {
                    format!("{name} M={oversampling}")
                };
                let table = pr.eff90.map(|e| (pr.m_cpm as f64).log2() / e);
                (label, cfg, t_g, self.bit_mapping.unwrap_or(pr.mapping), table)
            }
            None => {
                let oversampling = self.oversampling.unwrap_or(1);
                let t_cpm = required("t_cpm", self.t_cpm)?;
                let t_g = required("t_g", self.t_g)?;
                let cfg = WaveformConfig {
                    m_cpm: required("m_cpm", self.m_cpm)?,
                    k: required("k", self.k)?,
                    p: required("p", self.p)?,
                    ts: 1.0,
                    t_cpm,
                    phi0: self.phi0.unwrap_or(0.0),
                    n_if: self.n_if.unwrap_or(0.0),
                    oversampling,
                    grid: self.grid.unwrap_or_else(|| default_grid(oversampling, t_cpm, t_g)),
                    es,
                };
                ("custom".to_string(), cfg, t_g, self.bit_mapping.unwrap_or(BitMapping::Gray), None)
            }
        };
        cfg.validate()?;
        let sample_offset = self
            .sample_offset
            .unwrap_or_else(|| default_sample_offset(cfg.grid));
        if sample_offset >= cfg.grid as usize {
            return Err(Error::InvalidConfig(format!(
                "sample_offset {sample_offset} must be below grid {}",
                cfg.grid
            )));
        }
        Ok(Waveform { name, cfg, t_g, sample_offset, bit_mapping: mapping, table_b90_ts: table })
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<Waveform> {
        let w = self.waveform.resolve()?;
        let s = &self.sweep;
        if s.snr_db.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidConfig("snr grid must be strictly increasing".into()));
        }
        if s.snr_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("snr grid must be finite".into()));
        }
        if s.min_errors < 1 {
            return Err(Error::InvalidConfig("min_errors must be at least 1".into()));
        }
        if s.frame_symbols == 0 || s.max_symbols == 0 {
            return Err(Error::InvalidConfig("frame_symbols and max_symbols must be positive".into()));
        }
        if !w.cfg.m_cpm.is_power_of_two() {
            return Err(Error::InvalidConfig("bit error counting needs a power-of-two alphabet".into()));
        }
        if self.detector.kind == DetectorKind::Simple && (w.cfg.m_cpm != 2 || w.cfg.oversampling != 1) {
            return Err(Error::InvalidConfig(
                "the simple demodulator needs a binary waveform with one sample per symbol".into(),
            ));
        }
        if !(self.detector.orthant_tol > 0.0) {
            return Err(Error::InvalidConfig("orthant_tol must be positive".into()));
        }
        if self.bandwidth.reference == BandwidthReference::Table && w.table_b90_ts.is_none() {
            return Err(Error::InvalidConfig(format!(
                "{} has no tabulated bandwidth; set bandwidth.reference = \"estimated\"",
                w.name
            )));
        }
        Ok(w)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn orthant_settings(&self) -> OrthantSettings {
        OrthantSettings {
            tol: self.detector.orthant_tol,
            max_points: self.detector.orthant_max_points,
            ..OrthantSettings::default()
        }
    }
}

/// Read and validate an experiment file.
pub fn load_spec(path: &Path) -> Result<ExperimentSpec> {
    ExperimentSpec::from_toml(&std::fs::read_to_string(path)?)
}

/// The nine waveforms of the bandwidth table.
pub fn bandwidth_table_waveforms() -> Vec<WaveformSection> {
    let mut rows = vec![
        WaveformSection::preset("8-CPFSK"),
        WaveformSection { oversampling: Some(4), ..WaveformSection::preset("4-CPFSK") },
        WaveformSection { oversampling: Some(2), ..WaveformSection::preset("4-CPFSK") },
    ];
    rows.extend(
        FTN_TABLE
            .iter()
            .map(|(t, _)| WaveformSection { t_cpm: Some(*t), ..WaveformSection::preset("FTN-CPM") }),
    );
    rows
}
