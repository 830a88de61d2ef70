//! `cpmsim`: run BER, rate, bandwidth and PSD experiments from a TOML file.
//!
//! Thread count follows `RAYON_NUM_THREADS`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use onebit_cpm::experiments::{
    bandwidth_table_waveforms, emit_results, estimate_waveform_psd, load_spec, run_bandwidth_table, run_ber_sweep,
    run_rate_sweep, Format,
};
use onebit_cpm::Result;

#[derive(Parser)]
#[command(name = "cpmsim", version, about = "1-bit FTN-CPM link experiments")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Bit error rate sweep.
    Ber(Common),
    /// Information rate and spectral efficiency sweep.
    Rate(Common),
    /// Containment bandwidth table for the nine reference waveforms.
    Bandwidth(Common),
    /// Power spectral density of the configured waveform.
    Psd(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long)]
    spec: PathBuf,
    /// Overrides the seed in the experiment file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
}

fn run(verb: &Verb) -> Result<()> {
    let (Verb::Ber(c) | Verb::Rate(c) | Verb::Bandwidth(c) | Verb::Psd(c)) = verb;
    let mut spec = load_spec(&c.spec)?;
    if let Some(seed) = c.seed {
        spec.seed = seed;
    }
    let format: Format = c.format.parse()?;
    let start = Instant::now();
    match verb {
        Verb::Ber(_) => emit_results(&run_ber_sweep(&spec)?, format, &c.out)?,
        Verb::Rate(_) => emit_results(&run_rate_sweep(&spec)?, format, &c.out)?,
        Verb::Bandwidth(_) => emit_results(&run_bandwidth_table(&bandwidth_table_waveforms(), &spec)?, format, &c.out)?,
        Verb::Psd(_) => {
            let w = spec.validate()?;
            emit_results(&estimate_waveform_psd(&w, &spec)?, format, &c.out)?
        }
    }
    eprintln!("wrote {} in {:.1} s", c.out.display(), start.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.verb) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
