use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: bad parameters, mismatched orders, untagged instances.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// A numeric precondition failed (probability above one, size limit exceeded).
    #[error("numeric limit: {0}")]
    NumericLimit(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn limit(msg: impl Into<String>) -> Self {
        Error::NumericLimit(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
