//! Error types shared across the crate.

/// Errors produced by model construction, analysis, and simulation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An input violated a domain precondition (range, integrality, moment
    /// inequality, ...). The message names the offending value.
    #[error("domain error: {0}")]
    Domain(String),

    /// A waiting-time denominator reached saturation; the message names the
    /// queue, rank, or condition that hit the limit.
    #[error("stability error: {0}")]
    Stability(String),

    /// Malformed external input (traffic-matrix CSV, report CSV, config).
    #[error("format error: {0}")]
    Format(String),

    /// A measurement was requested on too few samples.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Internal consistency violation (missing coverage, mismatched pair sets).
    #[error("internal consistency error: {0}")]
    Inconsistent(String),

    /// Filesystem or I/O failure, carried as text so the error stays `Clone`.
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
