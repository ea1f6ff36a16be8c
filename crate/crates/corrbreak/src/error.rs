use thiserror::Error;

/// Errors produced by the smoothing, testing and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("variance curve has a non-positive entry at index {index}: {value}")]
    NonPositiveVariance { index: usize, value: f64 },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("bandwidth {bandwidth} too small: {reason}")]
    BandwidthTooSmall { bandwidth: f64, reason: String },

    #[error("bandwidth grid is empty")]
    EmptyGrid,

    #[error("no feasible bandwidth in the grid: {0}")]
    AllInfeasible(String),

    #[error("segment of {len} points cannot support bandwidth {bandwidth} (needs {needed})")]
    SideTooShort {
        len: usize,
        bandwidth: f64,
        needed: usize,
    },

    #[error("index {index} outside valid range {lo}..={hi}")]
    IndexOutOfRange { index: usize, lo: usize, hi: usize },

    #[error("series of length {n} too short: {reason}")]
    SeriesTooShort { n: usize, reason: String },

    #[error("bootstrap window {m} too large for series of length {n}")]
    WindowTooLarge { m: usize, n: usize },

    #[error("degenerate correlation break at t = {t_hat}: statistic unreliable")]
    DegenerateBreak { t_hat: f64 },

    #[error("series of length {n} below the hard floor of {min} observations")]
    InsufficientLength { n: usize, min: usize },

    #[error("window candidate grid too small: {0}")]
    GridTooSmall(String),

    #[error("segment ({lo}, {hi}] of {len} points below the {min}-point floor")]
    SegmentTooShort {
        lo: usize,
        hi: usize,
        len: usize,
        min: usize,
    },

    #[error("parse error at line {line}: {reason}")]
    ParseError { line: usize, reason: String },

    #[error("input contains no usable observations")]
    EmptySeries,

    #[error("non-finite value at position {index}")]
    NonFinite { index: usize },

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 usage, 2 data error, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::UnknownModel(_) | Error::UnknownExperiment(_) | Error::InvalidConfig(_) => 1,
            Error::ParseError { .. }
            | Error::EmptySeries
            | Error::NonFinite { .. }
            | Error::InsufficientLength { .. }
            | Error::Io(_) => 2,
            _ => 3,
        }
    }
}
