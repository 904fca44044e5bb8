use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the valuation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: NEGATIVE_AMOUNT: amount {amount} is negative")]
    NegativeAmount { line: usize, amount: String },

    #[error("line {line}: unknown period frequency '{value}' (expected 1 or 3 months)")]
    UnknownFrequency { line: usize, value: String },

    #[error("line {line}: duplicate record for asset {asset_id} at {period}")]
    DuplicatePeriod {
        line: usize,
        asset_id: String,
        period: String,
    },

    #[error("asset {asset_id}: records overlap at {period}")]
    OverlappingRecords { asset_id: String, period: String },

    #[error("asset {asset_id}: {message}")]
    UnmatchedAsset { asset_id: String, message: String },

    #[error("missing share cell for base age {base_age}, horizon {horizon}, level {level}")]
    MissingCell {
        base_age: u32,
        horizon: u32,
        level: f64,
    },

    #[error("invalid population spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Attaches the offending file path to an error.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
