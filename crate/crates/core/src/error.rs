use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("action {action} out of range for {num_actions} actions")]
    ActionOutOfRange { action: usize, num_actions: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("architecture has no hidden layer")]
    NoHiddenLayer,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("prior covariance is singular")]
    SingularPrior,

    #[error("label {label} at row {row} out of range for {num_actions} actions")]
    LabelOutOfRange {
        row: usize,
        label: i64,
        num_actions: usize,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error in column `{column}`: {message}")]
    Schema { column: String, message: String },

    #[error("rank {rank} exceeds min(rows, cols) = {max}")]
    Rank { rank: usize, max: usize },

    #[error("horizon {horizon} must exceed the warmup length {warmup}")]
    HorizonTooShort { horizon: usize, warmup: usize },

    #[error("record at t={t} carries no optimal reward")]
    MissingOracle { t: usize },

    #[error("need at least {needed} post-warmup records, got {got}")]
    TooFewRecords { needed: usize, got: usize },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("invalid binary data: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
