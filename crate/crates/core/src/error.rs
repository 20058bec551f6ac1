use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input value lies outside the domain of the operation (NaN pixels, β ∉ (0,1], ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("invalid band: {0}")]
    InvalidBand(String),

    #[error("no valid pairs: all {skipped} pair(s) fell below the distance tolerance")]
    NoValidPairs { skipped: usize },

    #[error("ratio undefined: denominator {denominator:e} is not above tolerance (numerator {numerator:e})")]
    UndefinedRatio { numerator: f64, denominator: f64 },

    #[error("unstable finite-difference estimate for derivative order {order}: {coarse:e} vs {fine:e}")]
    UnstableEstimate { order: usize, coarse: f64, fine: f64 },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("malformed {format} data{}: {message}", record.map(|r| format!(" (record {r})")).unwrap_or_default())]
    Format {
        format: &'static str,
        record: Option<usize>,
        message: String,
    },

    #[error("pair ({first}, {second}): {source}")]
    Pair {
        first: String,
        second: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn format(format: &'static str, record: Option<usize>, message: impl Into<String>) -> Self {
        Error::Format {
            format,
            record,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
