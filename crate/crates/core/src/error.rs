use thiserror::Error;

/// Errors raised anywhere in the simulation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("symbol {symbol} outside alphabet of size {alphabet}")]
    InvalidSymbol { symbol: u32, alphabet: u32 },

    #[error("state has {got} recent symbols, expected {expected}")]
    StateLength { got: usize, expected: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{what} = {value} is not a multiple of the grid spacing {dt}")]
    OffGrid { what: &'static str, value: f64, dt: f64 },

    #[error("empty input")]
    EmptyInput,

    #[error("covariance is not positive semi-definite (pivot {pivot} = {value:e})")]
    NotPsd { pivot: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("trellis with {branches} branches exceeds the cap of {cap} ({context})")]
    ResourceCap {
        branches: u64,
        cap: u64,
        context: String,
    },

    #[error("degenerate power spectrum")]
    DegeneratePsd,

    #[error("segment length {segment} exceeds signal length {signal}")]
    SegmentTooLong { segment: usize, signal: usize },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ResourceCap { .. } => 3,
            Error::Io(_) | Error::Json(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
