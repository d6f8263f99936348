use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("value {value} outside support [0, {upper}]")]
    Support { value: f64, upper: f64 },

    #[error("{0} did not converge")]
    Convergence(String),

    #[error("index {index} out of range 1..={len}")]
    Index { index: usize, len: usize },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("no candidate distribution could be fitted")]
    AllCandidatesFailed,

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code, used in CLI error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::EmptyInput(_) => "empty-input",
            Error::Degenerate(_) => "degenerate-input",
            Error::Support { .. } => "support",
            Error::Convergence(_) => "convergence",
            Error::Index { .. } => "index",
            Error::ResourceLimit(_) => "resource-limit",
            Error::AllCandidatesFailed => "all-candidates-failed",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
