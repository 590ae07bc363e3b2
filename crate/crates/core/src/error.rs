use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("operator is not Hermitian (max |A - A^dagger| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is {rows}x{cols}, expected a square matrix")]
    NotSquare { rows: usize, cols: usize },

    #[error("minimum eigenvalue {min_eigenvalue:.3e} is below the allowed -{tolerance:.0e}")]
    NotPositive { min_eigenvalue: f64, tolerance: f64 },

    #[error("trace {trace} differs from 1 by more than {tolerance:.0e}")]
    TraceNotOne { trace: f64, tolerance: f64 },

    #[error("spectrum [{min:.6e}, {max:.6e}] leaves the interval [0, 1]")]
    SpectrumOutOfRange { min: f64, max: f64 },

    #[error("operator is not idempotent (max |P^2 - P| = {deviation:.3e})")]
    NotIdempotent { deviation: f64 },

    #[error("vector norm {norm} is not 1")]
    NotNormalized { norm: f64 },

    #[error("Kraus family is not trace preserving (max |sum K^dagger K - I| = {deviation:.3e})")]
    NotTracePreserving { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("subsystem dimensions {dims:?} do not factor dimension {dim}")]
    InconsistentSubsystems { dims: Vec<usize>, dim: usize },

    #[error("invalid rank {rank} for dimension {dim}")]
    InvalidRank { rank: usize, dim: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("blocklength n = {n} is too small; the expansion needs n >= {min_n}")]
    BlocklengthTooSmall { n: u64, min_n: u64 },

    #[error("decoding premise violated: Tr{{(I - Lambda) zeta}} = {error_prob:.6e} exceeds eps - eta = {budget:.6e}")]
    PremiseViolated { error_prob: f64, budget: f64 },

    #[error("state is not block diagonal in the classical basis (max off-block entry {deviation:.3e})")]
    NotClassicalQuantum { deviation: f64 },

    #[error("bound violated by {excess:.3e}: {context}")]
    BoundViolated { context: String, excess: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
