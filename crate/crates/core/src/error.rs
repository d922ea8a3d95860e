use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: String,
        got: String,
    },
    #[error("matrix {what} is not square ({rows}x{cols})")]
    NotSquare {
        what: String,
        rows: usize,
        cols: usize,
    },
    #[error("matrix {0} is not symmetric")]
    NotSymmetric(String),
    #[error("matrix {0} is not positive semi-definite")]
    NotPsd(String),
    #[error("matrix {0} is not positive definite")]
    NotPd(String),
    #[error("matrix {0} is singular")]
    Singular(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{what} did not converge within {iters} iterations")]
    NoConvergence { what: String, iters: usize },
    #[error("predict must be called before update")]
    UpdateWithoutPredict,
    #[error("invalid attack specification: {0}")]
    InvalidAttack(String),
    #[error("unknown scenario id {id:?}; valid ids: {valid}")]
    UnknownScenario { id: String, valid: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn dims(what: &str, expected: impl ToString, got: impl ToString) -> Self {
        Error::DimensionMismatch {
            what: what.to_string(),
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
