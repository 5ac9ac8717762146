use nalgebra::DVector;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    /// The normal matrix is singular or too badly conditioned to identify all parameters.
    #[error("rank deficient regressors: {0}")]
    Rank(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// An iterative routine hit its iteration cap. `best` is the last iterate.
    #[error("no convergence after {iterations} iterations: {reason}")]
    Convergence {
        iterations: usize,
        reason: String,
        best: Option<DVector<f64>>,
    },

    #[error("lagrange multiplier undefined: {0}")]
    UndefinedMultiplier(String),

    #[error("malformed input at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        match err.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Parse {
                line,
                message: format!("{other:?}"),
            },
        }
    }
}
