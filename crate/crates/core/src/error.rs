use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (defect {defect:e} exceeds {tolerance:e})")]
    NotHermitian { defect: f64, tolerance: f64 },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e}, tolerance {tolerance:e})")]
    NotPsd { min_eigenvalue: f64, tolerance: f64 },

    #[error("arity mismatch: function takes {expected} arguments, got {found}")]
    ArityMismatch { expected: usize, found: usize },

    #[error("coordinate {index} is negative ({value})")]
    NegativeCoordinate { index: usize, value: f64 },

    #[error("coefficient map is not permutation invariant: {0}")]
    Asymmetric(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("evaluation leaves the nonnegative orthant: {0}")]
    Domain(String),

    #[error("bump normalization failed: quadrature mass {mass} deviates from 1 by more than {tolerance:e}")]
    Quadrature { mass: f64, tolerance: f64 },

    #[error("base nodes must be pairwise distinct (duplicate {0})")]
    DuplicateNodes(String),

    #[error("family size {n} exceeds the guard of {limit} nodes")]
    SizeGuard { n: u64, limit: u64 },

    #[error("multi-index {index:?} is outside the simplex of degree {degree}")]
    IndexOutOfRange { index: Vec<u32>, degree: u32 },

    #[error("moment system is rank deficient (rank {rank} < {expected})")]
    RankDeficient { rank: usize, expected: usize },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
