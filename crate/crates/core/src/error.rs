use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("{what}: series did not converge within {terms} terms")]
    NonConvergence { what: &'static str, terms: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("Picard iteration stopped after {iterations} iterations with distance {distance:e}")]
    PicardDivergence { iterations: usize, distance: f64 },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("missing derivative: {0}")]
    MissingDerivative(&'static str),

    #[error("continuation stalled: {0}")]
    ContinuationStalled(String),

    #[error("blow-up undecided: {0}")]
    BlowUpAmbiguous(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
