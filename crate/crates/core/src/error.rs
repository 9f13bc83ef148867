use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} variables, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("polynomial is not even: {0}")]
    NotEven(String),

    #[error("invalid relaxation spec: {0}")]
    InvalidSpec(String),

    #[error("degree bound {bound} is smaller than the objective degree {degree}")]
    DegreeTooSmall { bound: u32, degree: u32 },

    #[error("relaxation has no multiplier monomials")]
    EmptyBasis,

    #[error("malformed conic program: {0}")]
    MalformedProgram(String),

    #[error("solve report carries no primal solution")]
    MissingSolution,

    #[error("support enumeration is limited to n <= {max}, got n = {n}")]
    TooLarge { n: usize, max: usize },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
