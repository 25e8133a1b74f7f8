//! Weight matrices for the majorization step: each outer iteration rebuilds
//! the convex surrogate from the previous iterate through these formulas.

use nalgebra::DMatrix;

use crate::error::MatError;
use crate::mat::{thin_svd, DenseMatrix};

/// One convex surrogate's parameters: spectral weights for the nuclear term,
/// entrywise weights for the sparse term, and their regularizers.
#[derive(Debug, Clone)]
pub struct WeightSet {
    /// m x m symmetric positive-definite spectral weight.
    pub w_y: DenseMatrix,
    /// n x n symmetric positive-definite spectral weight.
    pub w_z: DenseMatrix,
    /// m x n entrywise-positive sparse weight.
    pub w_e: DenseMatrix,
    /// Sparse-term regularizer (delta_1).
    pub delta1: f64,
    /// Spectral regularizer (delta_2).
    pub delta2: f64,
}

impl WeightSet {
    /// Identity spectral weights plus the constant sparse weight produced by a
    /// previous all-ones error iterate: W_E = (1 + delta1)^(-1).
    pub fn initial(rows: usize, cols: usize, delta1: f64, delta2: f64) -> Result<Self, MatError> {
        check_deltas(delta1, delta2)?;
        let ones = DenseMatrix::from_fn(rows, cols, |_, _| 1.0)?;
        Ok(Self {
            w_y: DenseMatrix::identity(rows),
            w_z: DenseMatrix::identity(cols),
            w_e: error_weights(&ones, delta1)?,
            delta1,
            delta2,
        })
    }

    /// Rebuilds all three weights from the iterate (a, e).
    pub fn from_iterate(
        a: &DenseMatrix,
        e: &DenseMatrix,
        delta1: f64,
        delta2: f64,
    ) -> Result<Self, MatError> {
        check_deltas(delta1, delta2)?;
        let (w_y, w_z) = spectral_weights(a, delta2)?;
        Ok(Self {
            w_y,
            w_z,
            w_e: error_weights(e, delta1)?,
            delta1,
            delta2,
        })
    }
}

fn check_deltas(delta1: f64, delta2: f64) -> Result<(), MatError> {
    if !(delta1 > 0.0) || !(delta2 > 0.0) {
        return Err(MatError::InvalidArgument(format!(
            "delta1 and delta2 must be positive, got {delta1}, {delta2}"
        )));
    }
    Ok(())
}

/// Entrywise (|e_ij| + delta1)^(-1).
pub fn error_weights(e: &DenseMatrix, delta1: f64) -> Result<DenseMatrix, MatError> {
    if !(delta1 > 0.0) {
        return Err(MatError::InvalidArgument(format!(
            "delta1 must be positive, got {delta1}"
        )));
    }
    DenseMatrix::try_from_dmatrix(e.as_dmatrix().map(|v| 1.0 / (v.abs() + delta1)))
}

/// Inverse square roots of the regularized Gram factors of `a`:
///
///   W_Y = (U Sigma U^T + delta2 I_m)^(-1/2)
///   W_Z = (V Sigma V^T + delta2 I_n)^(-1/2)
///
/// built from the thin SVD as delta2^(-1/2) I + U (diag((sigma+delta2)^(-1/2))
/// - delta2^(-1/2) I) U^T, which equals the padded full-basis form exactly:
/// the orthogonal complement of the singular basis receives delta2^(-1/2).
pub fn spectral_weights(
    a: &DenseMatrix,
    delta2: f64,
) -> Result<(DenseMatrix, DenseMatrix), MatError> {
    if !(delta2 > 0.0) {
        return Err(MatError::InvalidArgument(format!(
            "delta2 must be positive, got {delta2}"
        )));
    }
    let thin = thin_svd(a.as_dmatrix())?;
    let w_y = inverse_sqrt_from_basis(&thin.u, thin.sigma.as_slice(), delta2);
    let v = thin.v_t.transpose();
    let w_z = inverse_sqrt_from_basis(&v, thin.sigma.as_slice(), delta2);
    Ok((
        DenseMatrix::try_from_dmatrix(w_y)?,
        DenseMatrix::try_from_dmatrix(w_z)?,
    ))
}

fn inverse_sqrt_from_basis(basis: &DMatrix<f64>, sigma: &[f64], delta2: f64) -> DMatrix<f64> {
    let m = basis.nrows();
    let k = basis.ncols();
    let background = delta2.powf(-0.5);
    let mut scaled = basis.clone();
    for j in 0..k {
        let f = (sigma[j] + delta2).powf(-0.5) - background;
        for i in 0..m {
            scaled[(i, j)] *= f;
        }
    }
    let mut w = scaled * basis.transpose();
    for i in 0..m {
        w[(i, i)] += background;
    }
    w
}

/// Outer-loop stopping statistic: ||next - prev||_F / ||prev||_F over the
/// concatenation of (w_y, w_z, w_e) in row-major order.
pub fn weight_delta(prev: &WeightSet, next: &WeightSet) -> Result<f64, MatError> {
    for (p, n, name) in [
        (&prev.w_y, &next.w_y, "w_y"),
        (&prev.w_z, &next.w_z, "w_z"),
        (&prev.w_e, &next.w_e, "w_e"),
    ] {
        if p.rows() != n.rows() || p.cols() != n.cols() {
            return Err(MatError::DimensionMismatch(format!(
                "{name}: prev is {}x{} but next is {}x{}",
                p.rows(),
                p.cols(),
                n.rows(),
                n.cols()
            )));
        }
    }
    let mut diff_sq = 0.0;
    let mut prev_sq = 0.0;
    for (p, n) in [
        (&prev.w_y, &next.w_y),
        (&prev.w_z, &next.w_z),
        (&prev.w_e, &next.w_e),
    ] {
        for i in 0..p.rows() {
            for j in 0..p.cols() {
                let pv = p.get(i, j);
                let d = n.get(i, j) - pv;
                diff_sq += d * d;
                prev_sq += pv * pv;
            }
        }
    }
    Ok(diff_sq.sqrt() / prev_sq.sqrt())
}
