use thiserror::Error;

/// Errors produced by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("data error: {0}")]
    Data(String),

    /// The requested enumeration is larger than the configured ceiling.
    #[error("refused: {what} needs ~{estimated_cost:.3e} units of work, ceiling is {ceiling:.3e}")]
    Refused {
        what: String,
        estimated_cost: f64,
        ceiling: f64,
    },

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn is_refusal(&self) -> bool {
        matches!(self, Error::Refused { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
