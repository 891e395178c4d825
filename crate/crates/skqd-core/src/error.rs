//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by lattice construction, state preparation, evolution,
/// sampling, and the diagonalization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid sector: {0}")]
    InvalidSector(String),

    #[error("symmetry violation: {0}")]
    SymmetryViolation(String),

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("empty subspace: {0}")]
    EmptySubspace(String),

    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    Convergence { residual: f64, iterations: usize },

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sample-count bound undefined: {0}")]
    BoundUndefined(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("sweep failure: {0}")]
    SweepFailure(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config, 3 resource cap, 4 convergence,
    /// 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::ResourceCap(_) => 3,
            Error::Convergence { .. } => 4,
            _ => 1,
        }
    }
}
