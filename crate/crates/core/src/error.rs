use std::path::PathBuf;

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("word of length {0} exceeds the packed limit of 64 symbols")]
    WordTooLong(usize),

    #[error("invalid symbol {0:?}; expected '0' or '1'")]
    InvalidSymbol(char),

    #[error("potential table has {found} entries, memory {memory} needs {expected}")]
    TableSize {
        memory: usize,
        expected: usize,
        found: usize,
    },

    #[error("potential memory {0} is outside 1..=16")]
    Memory(usize),

    #[error("potential value for word {word} is not finite")]
    NonFinite { word: String },

    #[error("potential is flagged normalized but its pressure is {0:e}")]
    NotNormalized(f64),

    #[error("transfer graph is not primitive: {0}")]
    NotPrimitive(String),

    #[error("eigen-solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("size budget exceeded: {0}")]
    Budget(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },

    #[error("malformed orbit file {path}: {message}")]
    OrbitFormat { path: PathBuf, message: String },

    #[error("construction produced an empty level at length {0}")]
    EmptyLevel(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }

    pub(crate) fn parse(origin: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            origin: origin.to_string(),
            line,
            message: message.into(),
        }
    }
}
