use thiserror::Error;

/// Errors raised by the calculus routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalculusError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("zero signal has no projector")]
    ZeroSignal,

    #[error("series order {requested} exceeds the implemented maximum {max}")]
    SeriesOrder { requested: usize, max: usize },

    #[error("the k = 1 group is degenerate and has no explicit correspondence rule")]
    DegenerateK,

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for CalculusError {
    fn from(e: std::io::Error) -> Self {
        CalculusError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CalculusError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(CalculusError::Domain(msg.into()))
}
