//! Crate-wide error types.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// A syntax error in a `.crn` or `.model` source, with its position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    /// 1-based line of the offending token.
    pub line: usize,
    /// 1-based column (in characters) of the offending token.
    pub column: usize,
    pub message: String,
    /// The source line the error points into.
    pub snippet: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>, snippet: &str) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
            snippet: snippet.to_string(),
        }
    }
}

/// Which part of the nonsingular M-matrix test failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MMatrixFailure {
    /// An off-diagonal entry is positive.
    SignPattern,
    /// The matrix is numerically singular.
    Singular,
    /// The inverse has a negative entry.
    NegativeInverse,
}

impl std::fmt::Display for MMatrixFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MMatrixFailure::SignPattern => write!(f, "positive off-diagonal entry"),
            MMatrixFailure::Singular => write!(f, "matrix is singular"),
            MMatrixFailure::NegativeInverse => write!(f, "inverse has negative entries"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("invalid model: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("not a nonsingular M-matrix: {0}")]
    NotMMatrix(MMatrixFailure),

    #[error("singular Jacobian at iterate {iterate:?}")]
    SingularJacobian { iterate: Vec<f64> },

    #[error("no convergence after {iterations} iterations (best residual {best_residual:e})")]
    NoConvergence {
        iterations: usize,
        best_residual: f64,
    },

    #[error("eigenvalue iteration did not converge")]
    EigenFailure,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
