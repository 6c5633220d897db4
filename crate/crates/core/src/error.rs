use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {0} exceeds the small-dense cap of {max}", max = crate::linalg::MAX_DIM)]
    DimensionTooLarge(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not self-adjoint (deviation {deviation:e}, tolerance {tolerance:e})")]
    NotSelfAdjoint { deviation: f64, tolerance: f64 },

    #[error("matrix is not symmetric (deviation {deviation:e})")]
    NotSymmetric { deviation: f64 },

    #[error("matrix is not J-invariant (deviation {deviation:e})")]
    NotJInvariant { deviation: f64 },

    #[error("eigenvalue iteration did not converge")]
    EigenNonConvergence,

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("eigenvalue with negative real part {re:e} (input corrupt)")]
    NegativeRealPart { re: f64 },

    #[error("space-time matrix lies on the singular set")]
    OnSingularSet,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
