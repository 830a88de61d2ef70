//! MAP detection over the extended trellis, the quadrant-change demodulator
//! and rate estimation.

pub mod bcjr;
pub mod metrics;
pub mod orthant;
pub mod rate;
pub mod simple;
pub mod trellis;

pub use bcjr::{bcjr_detect, AppTable};
pub use metrics::{BranchMetrics, WindowKey, DEFAULT_PROB_FLOOR};
pub use orthant::{orthant_probability, OrthantEstimate, OrthantQuery, OrthantSettings};
pub use rate::{estimate_information_rate, RateEstimate};
pub use simple::{quadrant_change, simple_demodulate};
pub use trellis::{build_trellis, build_trellis_capped, Branch, Trellis, TrellisLayout};
