//! Error types shared across the crate.

use thiserror::Error;

/// Errors from matrix construction, factorization, and file parsing.
#[derive(Debug, Error)]
pub enum MatError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("singular value decomposition did not converge")]
    SvdNonConvergence,
    #[error("csv error at line {line}: {message}")]
    Csv { line: usize, message: String },
}

/// Per-sweep constraint residuals of the inner alternating-direction loop,
/// both relative to ||P||_F.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepResidual {
    /// ||P - A - E||_F / ||P||_F (RPCA) or ||P - PA - E||_F / ||P||_F (LRR).
    pub constraint: f64,
    /// ||J - W_Y A W_Z||_F / ||P||_F.
    pub splitting: f64,
}

/// Errors raised by the inner and outer solvers.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Matrix(#[from] MatError),
    #[error(
        "inner solver diverged at sweep {sweep}: residual {residual:.3e} grew more than \
         1e3x from its minimum {best:.3e}"
    )]
    Divergence {
        sweep: usize,
        residual: f64,
        best: f64,
        trace: Vec<SweepResidual>,
    },
    #[error(
        "objective increased at outer iteration {iteration}: {previous:.12e} -> {current:.12e}"
    )]
    MonotonicityViolation {
        iteration: usize,
        previous: f64,
        current: f64,
        partial: Box<crate::mm::RecoveryResult>,
    },
}
