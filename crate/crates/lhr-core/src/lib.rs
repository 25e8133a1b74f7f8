//! Log-sum heuristic recovery: learning low-rank structure from sparsely
//! corrupted observations by replacing the nuclear/l1 pair with log-sum
//! penalties and minimizing them through a sequence of reweighted convex
//! programs.
//!
//! What's here:
//! - [`mat`]: validated dense matrices, full SVD, norms, the log-sum objective.
//! - [`prox`]: soft-thresholding and singular-value thresholding.
//! - [`weights`]: the reweighting formulas that define each convex surrogate.
//! - [`admm`]: alternating-direction inner solvers for the weighted programs
//!   under P = A + E (matrix recovery) and P = PA + E (self-representation).
//! - [`mm`]: the outer majorization-minimization loop with its monotone
//!   objective certificate, plus the plain nuclear/l1 baselines.
//! - [`synth`]: seeded planted instances and the feasible-region phase scan.
//! - [`cluster`]: affinity construction, spectral clustering, scoring, and
//!   price-series preprocessing.
//!
//! Entry points: [`mm::lhr_solve_rpca`], [`mm::lhr_solve_lrr`],
//! [`mm::pcp_solve`], [`synth::phase_scan`], [`cluster::cluster_dataset`].

pub mod admm;
pub mod cluster;
pub mod error;
pub mod mat;
pub mod mm;
pub mod prox;
pub mod synth;
pub mod weights;

pub use error::{MatError, SolveError, SweepResidual};
pub use mat::DenseMatrix;

/// Re-exported for callers that want to interoperate with the matrix backend.
pub use nalgebra;
