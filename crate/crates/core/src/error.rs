use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("not a permutation: {0}")]
    InvalidPermutation(String),

    #[error("vertex {vertex} has {kind}-degree {found}, expected {expected}")]
    DegreeViolation {
        vertex: usize,
        kind: &'static str,
        found: usize,
        expected: usize,
    },

    #[error("rejection sampler exhausted its budget of {0} attempts")]
    RejectionBudget(usize),

    #[error("dimension {n} exceeds the dense cap {cap}; use the krylov method for |lambda_2|")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("problem exceeds the desk-scale guard: {0}")]
    ScaleGuard(String),

    #[error("dense eigensolver failed to converge")]
    NoConvergence,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
