use thiserror::Error;

/// Errors shared across the library modules.
#[derive(Debug, Error)]
pub enum PhasememError {
    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("series grids do not match: {0}")]
    GridMismatch(String),

    #[error("numeric contract violation: {0}")]
    NumericContract(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, PhasememError>;
