use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("data matrix is empty")]
    EmptyData,

    #[error("depth method {method} is not valid for dimension p={p}")]
    IncompatibleMethod { method: &'static str, p: usize },

    #[error("matrix is not symmetric positive definite ({0})")]
    NotSpd(String),

    #[error("{0}")]
    Insufficient(String),
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
