use chrono::NaiveDate;
use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Every variant renders as a single line so the CLI can print it behind a
/// stable prefix.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("length error: expected {expected} bytes, found {actual}")]
    Length { expected: u64, actual: u64 },

    #[error("coverage error: {what} requires {required} days, {available} available")]
    Coverage {
        what: String,
        required: usize,
        available: usize,
    },

    #[error("alignment error: first offending date {0}")]
    Alignment(NaiveDate),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("channel error: {0}")]
    Channel(String),

    #[error("batch error: {0}")]
    Batch(String),

    #[error("degeneracy error: {0}")]
    Degenerate(String),

    #[error("undefined phase: zero-amplitude RMM vector")]
    UndefinedPhase,

    #[error("undefined metric at lead {lead}: {reason}")]
    UndefinedMetric { lead: usize, reason: String },

    #[error("training error: {0}")]
    Training(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Dimension(msg.into()))
}
