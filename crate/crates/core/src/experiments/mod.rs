//! Experiment files, seeded sweeps and result emission.

pub mod config;
pub mod emit;
pub mod sweep;

pub use config::{
    bandwidth_table_waveforms, load_spec, BandwidthReference, BitMapping, DetectorKind, ExperimentSpec, Waveform,
    WaveformSection,
};
pub use emit::{emit_results, Emit, Format};
pub use sweep::{
    estimate_waveform_psd, receive_chain, run_bandwidth_table, run_ber_sweep, run_rate_sweep, wilson_interval,
    BandwidthRow, BerPoint, ExperimentResult, RatePoint, RateResult, StopReason,
};
