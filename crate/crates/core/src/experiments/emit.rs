//! CSV and JSON output of experiment results.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::sweep::{BandwidthRow, ExperimentResult, RateResult};
use crate::error::{Error, Result};
use crate::spectrum::PsdEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidConfig(format!("unknown format {other:?}"))),
        }
    }
}

/// Anything that can be written as a CSV table or a JSON document.
pub trait Emit: Serialize {
    fn to_csv(&self) -> String;

    fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => Ok(self.to_csv()),
            Format::Json => self.to_json(),
        }
    }
}

impl Emit for ExperimentResult {
    fn to_csv(&self) -> String {
        let mut s = String::from("snr_db,ber,bit_errors,bits,ci_lo,ci_hi\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{},{},{},{},{}", p.snr_db, p.ber, p.bit_errors, p.bits, p.ci_lo, p.ci_hi);
        }
        s
    }
}

impl Emit for RateResult {
    fn to_csv(&self) -> String {
        let mut s = String::from("snr_db,bits_per_symbol,spectral_efficiency,symbols\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{},{},{}", p.snr_db, p.bits_per_symbol, p.spectral_efficiency, p.symbols);
        }
        s
    }
}

impl Emit for Vec<BandwidthRow> {
    fn to_csv(&self) -> String {
        let mut s = String::from("waveform,oversampling,b90_ts,b95_ts,eff90,eff95,osr_eff\n");
        for r in self {
            let b = &r.report;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.waveform, r.oversampling, b.b90_ts, b.b95_ts, b.eff90, b.eff95, b.osr_eff
            );
        }
        s
    }
}

impl Emit for PsdEstimate {
    fn to_csv(&self) -> String {
        let mut s = String::from("freq,power\n");
        for (f, p) in self.freqs.iter().zip(&self.power) {
            let _ = writeln!(s, "{f},{p}");
        }
        s
    }
}

/// Write `result` to `path` in `format`.
pub fn emit_results<T: Emit>(result: &T, format: Format, path: &Path) -> Result<()> {
    std::fs::write(path, result.render(format)?)?;
    Ok(())
}
