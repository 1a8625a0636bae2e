use thiserror::Error;

#[derive(Debug, Error)]
pub enum QcurError {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl QcurError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        QcurError::Validation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, QcurError>;
