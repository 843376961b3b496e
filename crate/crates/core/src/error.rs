use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("site index {index} out of range for array of {len} sites")]
    SiteOutOfRange { index: usize, len: usize },

    #[error("mask does not fit the grid: {0}")]
    MaskOutOfBounds(String),

    #[error("{field}: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("invalid move: {0}")]
    InvalidMove(String),

    #[error("plan inconsistent with occupancy: {0}")]
    InvalidPlan(String),

    #[error("no run records to aggregate")]
    EmptyRecords,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
