use thiserror::Error;

/// Errors produced by model construction, estimation and I/O.
#[derive(Error, Debug)]
pub enum IarError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing column '{0}' in CSV header")]
    MissingColumn(String),

    #[error("duplicate timestamp {time} in input data")]
    DuplicateTimestamp { time: f64 },

    #[error("row {row}: could not parse '{field}' as a number")]
    ParseRow { row: usize, field: String },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, IarError>;

impl IarError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        IarError::InvalidArgument(msg.into())
    }
}
