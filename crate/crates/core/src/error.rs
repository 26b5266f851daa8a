use thiserror::Error;

/// Errors raised by the library.
///
/// Variants are grouped so that front-ends can map them onto exit codes:
/// argument-like problems, numerical degeneracy, and accuracy failures.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A named model invariant does not hold.
    #[error("invariant `{name}` violated: {detail}")]
    Invariant { name: &'static str, detail: String },

    #[error("matrix error: {0}")]
    Matrix(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{0} is outside the calibrated tail region")]
    OutOfDomain(String),

    /// No index set certifies as the QP solution.
    #[error("numerical degeneracy: {message} (best candidate {candidate:?}, residuals {residuals:?})")]
    Degenerate {
        message: String,
        candidate: Vec<usize>,
        residuals: Vec<f64>,
    },

    #[error("ambiguous zero test: {0}; confirm with exact arithmetic")]
    Ambiguous(String),

    #[error("integral diverges: {0}")]
    Diverged(String),

    #[error("accuracy failure: {0}")]
    Accuracy(String),

    #[error("insufficient samples: {hits} conditioning hits, need at least {required}; use radial tilting or more samples")]
    InsufficientSamples { hits: u64, required: u64 },

    #[error("oracle failed: {0}")]
    OracleFailure(String),
}

impl Error {
    pub fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
