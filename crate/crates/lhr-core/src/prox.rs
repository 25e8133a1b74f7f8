//! Closed-form proximal operators: scalar and elementwise soft-thresholding,
//! and singular-value thresholding.

use nalgebra::DMatrix;

use crate::error::MatError;
use crate::mat::{thin_svd, DenseMatrix};

/// sgn(y) * max(|y| - alpha, 0): the unique minimizer of alpha|x| + (x-y)^2/2.
///
/// Requires alpha >= 0.
pub fn soft_threshold(y: f64, alpha: f64) -> f64 {
    debug_assert!(alpha >= 0.0, "negative threshold {alpha}");
    let mag = y.abs() - alpha;
    if mag > 0.0 {
        y.signum() * mag
    } else {
        0.0
    }
}

/// Elementwise soft-thresholding with a per-entry threshold matrix.
pub fn shrink_matrix(m: &DenseMatrix, alphas: &DenseMatrix) -> Result<DenseMatrix, MatError> {
    if m.rows() != alphas.rows() || m.cols() != alphas.cols() {
        return Err(MatError::DimensionMismatch(format!(
            "matrix is {}x{} but thresholds are {}x{}",
            m.rows(),
            m.cols(),
            alphas.rows(),
            alphas.cols()
        )));
    }
    if alphas.as_dmatrix().iter().any(|a| *a < 0.0) {
        return Err(MatError::InvalidArgument(
            "threshold entries must be non-negative".into(),
        ));
    }
    let out = m
        .as_dmatrix()
        .zip_map(alphas.as_dmatrix(), soft_threshold);
    DenseMatrix::try_from_dmatrix(out)
}

/// Crate-internal shrink on raw nalgebra matrices (no re-validation).
pub(crate) fn shrink_dmatrix(m: &DMatrix<f64>, alphas: &DMatrix<f64>) -> DMatrix<f64> {
    m.zip_map(alphas, soft_threshold)
}

/// Singular-value thresholding: U s_alpha(Sigma) V^T, the unique minimizer of
/// alpha ||X||_* + ||X - m||_F^2 / 2. Singular values equal to the threshold
/// map to zero.
pub fn svt(m: &DenseMatrix, alpha: f64) -> Result<DenseMatrix, MatError> {
    if !(alpha >= 0.0) {
        return Err(MatError::InvalidArgument(format!(
            "svt threshold must be non-negative, got {alpha}"
        )));
    }
    DenseMatrix::try_from_dmatrix(svt_dmatrix(m.as_dmatrix(), alpha)?)
}

pub(crate) fn svt_dmatrix(m: &DMatrix<f64>, alpha: f64) -> Result<DMatrix<f64>, MatError> {
    let thin = thin_svd(m)?;
    let k = thin.sigma.len();
    // u * diag(max(sigma - alpha, 0)) folded into u's columns, then * v_t
    let mut u = thin.u;
    for j in 0..k {
        let s = (thin.sigma[j] - alpha).max(0.0);
        for i in 0..u.nrows() {
            u[(i, j)] *= s;
        }
    }
    Ok(u * thin.v_t)
}
