use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum LigpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A Cholesky factorization failed even after diagonal jitter.
    #[error("{matrix} is numerically ill-conditioned; factorization failed after jitter")]
    IllConditioned { matrix: &'static str },

    /// Adding this inducing point would make the cached factors singular
    /// (duplicate point or nonpositive Schur pivot). Callers should skip
    /// the candidate.
    #[error("degenerate update: candidate duplicates an inducing point or yields a nonpositive pivot")]
    DegenerateUpdate,

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LigpError>;

impl LigpError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        LigpError::InvalidArgument(msg.into())
    }
}
