//! Continuous phase modulation with faster-than-Nyquist signaling over AWGN,
//! received through an oversampled 1-bit quantizer.
//!
//! * [`cpm`]: tilted phase trellis, modulator, Carson bandwidth algebra.
//! * [`frontend`]: receive filter, decimation, noise and quantizer.
//! * [`detection`]: orthant probabilities, BCJR, quadrant-change demodulator, rate estimate.
//! * [`spectrum`]: Welch PSD, containment bandwidth, SNR and efficiency metrics.
//! * [`experiments`]: experiment files, sweeps and output.

pub mod cpm;
pub mod detection;
pub mod error;
pub mod experiments;
pub mod frontend;
pub mod rng;
pub mod spectrum;

pub use error::{Error, Result};
