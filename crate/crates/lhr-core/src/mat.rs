//! Dense real-matrix foundation: validated storage, full SVD, norms, and the
//! log-sum objective monitor.
//!
//! `DenseMatrix` is a thin finiteness-validated wrapper over `nalgebra::DMatrix`;
//! every matrix handed out by this crate satisfies "all entries finite".

use nalgebra::{DMatrix, DVector};

use crate::error::MatError;

/// Backend SVD iteration cap. nalgebra's implicit-QR SVD converges in a handful
/// of sweeps per singular value; 1000 leaves a wide margin for 400x400 inputs.
const SVD_MAX_ITERS: usize = 1000;

/// Dense, finite, row-major-presented real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    inner: DMatrix<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major entries, rejecting non-finite values and
    /// length mismatches.
    pub fn from_rows(rows: usize, cols: usize, entries: &[f64]) -> Result<Self, MatError> {
        if rows == 0 || cols == 0 {
            return Err(MatError::InvalidArgument(
                "matrix dimensions must be positive".into(),
            ));
        }
        if entries.len() != rows * cols {
            return Err(MatError::DimensionMismatch(format!(
                "expected {} entries for a {}x{} matrix, got {}",
                rows * cols,
                rows,
                cols,
                entries.len()
            )));
        }
        let inner = DMatrix::from_row_slice(rows, cols, entries);
        Self::try_from_dmatrix(inner)
    }

    /// Wraps an existing nalgebra matrix, validating finiteness.
    pub fn try_from_dmatrix(inner: DMatrix<f64>) -> Result<Self, MatError> {
        if inner.nrows() == 0 || inner.ncols() == 0 {
            return Err(MatError::InvalidArgument(
                "matrix dimensions must be positive".into(),
            ));
        }
        for j in 0..inner.ncols() {
            for i in 0..inner.nrows() {
                if !inner[(i, j)].is_finite() {
                    return Err(MatError::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self { inner })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            inner: DMatrix::zeros(rows, cols),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, MatError> {
        Self::try_from_dmatrix(DMatrix::from_fn(rows, cols, f))
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner[(row, col)]
    }

    /// Entries in row-major order (the wire order of matrix-csv).
    pub fn entries_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.inner[(i, j)]);
            }
        }
        out
    }

    /// Borrow the backing nalgebra matrix.
    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn transpose(&self) -> Self {
        Self {
            inner: self.inner.transpose(),
        }
    }

    /// Serializes to matrix-csv: one row per line, comma-separated entries,
    /// shortest exact decimal representation, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                if j > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{}", self.inner[(i, j)]));
            }
            out.push('\n');
        }
        out
    }

    /// Parses matrix-csv. Accepts scientific notation; rejects ragged rows,
    /// unparsable cells, and non-finite values with line diagnostics.
    pub fn from_csv(text: &str) -> Result<Self, MatError> {
        let mut entries: Vec<f64> = Vec::new();
        let mut cols: Option<usize> = None;
        let mut rows = 0usize;
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut row_len = 0usize;
            for cell in line.split(',') {
                let v: f64 = cell.trim().parse().map_err(|_| MatError::Csv {
                    line: idx + 1,
                    message: format!("cannot parse {:?} as a number", cell.trim()),
                })?;
                if !v.is_finite() {
                    return Err(MatError::Csv {
                        line: idx + 1,
                        message: "non-finite value".into(),
                    });
                }
                entries.push(v);
                row_len += 1;
            }
            match cols {
                None => cols = Some(row_len),
                Some(c) if c != row_len => {
                    return Err(MatError::Csv {
                        line: idx + 1,
                        message: format!("row has {} entries, expected {}", row_len, c),
                    });
                }
                _ => {}
            }
            rows += 1;
        }
        let cols = cols.ok_or(MatError::Csv {
            line: 0,
            message: "empty matrix file".into(),
        })?;
        DenseMatrix::from_rows(rows, cols, &entries)
    }
}

/// Full singular value decomposition with complete orthogonal bases.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// m x m orthogonal left basis.
    pub left: DenseMatrix,
    /// min(m, n) singular values, non-increasing, all >= 0.
    pub singular_values: Vec<f64>,
    /// n x n orthogonal right basis.
    pub right: DenseMatrix,
}

impl SvdFactors {
    /// Reconstructs left * padded(sigma) * right^T.
    pub fn reconstruct(&self) -> DenseMatrix {
        let m = self.left.rows();
        let n = self.right.rows();
        let k = self.singular_values.len();
        let u = self.left.as_dmatrix();
        let v = self.right.as_dmatrix();
        // left[:, :k] * diag(sigma) * right[:, :k]^T
        let mut us = DMatrix::zeros(m, k);
        for j in 0..k {
            for i in 0..m {
                us[(i, j)] = u[(i, j)] * self.singular_values[j];
            }
        }
        let rec = &us * v.columns(0, k).transpose();
        debug_assert_eq!(rec.ncols(), n);
        DenseMatrix { inner: rec }
    }
}

/// Thin SVD factors straight from the backend (crate-internal fast path).
pub(crate) struct ThinSvd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

pub(crate) fn thin_svd(m: &DMatrix<f64>) -> Result<ThinSvd, MatError> {
    let svd = m
        .clone()
        .try_svd(true, true, f64::EPSILON, SVD_MAX_ITERS)
        .ok_or(MatError::SvdNonConvergence)?;
    Ok(ThinSvd {
        u: svd.u.expect("left vectors requested"),
        sigma: svd.singular_values,
        v_t: svd.v_t.expect("right vectors requested"),
    })
}

pub(crate) fn singular_values_only(m: &DMatrix<f64>) -> Result<DVector<f64>, MatError> {
    let svd = m
        .clone()
        .try_svd(false, false, f64::EPSILON, SVD_MAX_ITERS)
        .ok_or(MatError::SvdNonConvergence)?;
    Ok(svd.singular_values)
}

/// Extends the orthonormal columns of `u` (m x k) to a full m x m orthogonal
/// basis. The first k columns are `u` itself; the complement is found by
/// Gram-Schmidt over coordinate vectors, re-orthogonalized once.
fn complete_basis(u: &DMatrix<f64>) -> DMatrix<f64> {
    let m = u.nrows();
    let k = u.ncols();
    let mut q = DMatrix::<f64>::zeros(m, m);
    q.view_mut((0, 0), (m, k)).copy_from(u);
    let mut filled = k;
    for j in 0..m {
        if filled == m {
            break;
        }
        let mut v = DVector::<f64>::zeros(m);
        v[j] = 1.0;
        for _ in 0..2 {
            for c in 0..filled {
                let col = q.column(c);
                let proj = col.dot(&v);
                v.axpy(-proj, &col.clone_owned(), 1.0);
            }
        }
        let norm = v.norm();
        // Coordinate vectors nearly inside the current span contribute nothing.
        if norm > 1e-8 {
            v /= norm;
            q.set_column(filled, &v);
            filled += 1;
        }
    }
    assert_eq!(filled, m, "basis completion failed");
    q
}

/// Full SVD: returns complete left/right orthogonal bases and the
/// non-increasing singular values.
pub fn svd_full(m: &DenseMatrix) -> Result<SvdFactors, MatError> {
    let thin = thin_svd(m.as_dmatrix())?;
    let left = complete_basis(&thin.u);
    let right = complete_basis(&thin.v_t.transpose());
    Ok(SvdFactors {
        left: DenseMatrix { inner: left },
        singular_values: thin.sigma.iter().copied().collect(),
        right: DenseMatrix { inner: right },
    })
}

/// Neumaier compensated summation. The objective monitor compares sums of
/// tens of thousands of logs across iterations at 1e-9 slack; naive summation
/// noise would swamp that.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sum of singular values.
pub fn nuclear_norm(m: &DenseMatrix) -> Result<f64, MatError> {
    let sigma = singular_values_only(m.as_dmatrix())?;
    Ok(compensated_sum(sigma.iter().copied()))
}

/// Sum of absolute entries.
pub fn l1_norm(m: &DenseMatrix) -> f64 {
    compensated_sum(m.as_dmatrix().iter().map(|v| v.abs()))
}

/// Frobenius norm.
pub fn fro_norm(m: &DenseMatrix) -> f64 {
    m.as_dmatrix().norm()
}

/// Log-sum term: sum_ij log(|m_ij| + delta). Negative values are possible
/// when delta < 1.
pub fn logsum_norm(m: &DenseMatrix, delta: f64) -> Result<f64, MatError> {
    if !(delta > 0.0) {
        return Err(MatError::InvalidArgument(format!(
            "log-sum regularization constant must be positive, got {delta}"
        )));
    }
    Ok(compensated_sum(
        m.as_dmatrix().iter().map(|v| (v.abs() + delta).ln()),
    ))
}

/// The log-sum objective monitored across outer iterations:
///
/// sum_i log(sigma_i(a) + delta2) + lambda * sum_ij log(|e_ij| + delta1)
///
/// Additive constants of the full objective (the 1/2 factor cancels between
/// the two spectral terms; the padding term (m+n-2 min(m,n)) log delta2 is
/// iterate-independent) are dropped; only differences across iterations
/// matter.
pub fn lhr_objective(
    a: &DenseMatrix,
    e: &DenseMatrix,
    lambda: f64,
    delta1: f64,
    delta2: f64,
) -> Result<f64, MatError> {
    if a.rows() != e.rows() || a.cols() != e.cols() {
        return Err(MatError::DimensionMismatch(format!(
            "a is {}x{} but e is {}x{}",
            a.rows(),
            a.cols(),
            e.rows(),
            e.cols()
        )));
    }
    objective_value(a, e, lambda, delta1, delta2)
}

/// The objective without the equal-shape requirement: the self-representation
/// program monitors an n x n representation against an m x n error.
pub(crate) fn objective_value(
    a: &DenseMatrix,
    e: &DenseMatrix,
    lambda: f64,
    delta1: f64,
    delta2: f64,
) -> Result<f64, MatError> {
    if !(lambda > 0.0) || !(delta1 > 0.0) || !(delta2 > 0.0) {
        return Err(MatError::InvalidArgument(
            "lambda, delta1, delta2 must be positive".into(),
        ));
    }
    let sigma = singular_values_only(a.as_dmatrix())?;
    let spectral = compensated_sum(sigma.iter().map(|s| (s + delta2).ln()));
    let sparse = logsum_norm(e, delta1)?;
    Ok(spectral + lambda * sparse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn construction_rejects_non_finite() {
        let err = DenseMatrix::from_rows(1, 2, &[1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, MatError::NonFinite { row: 0, col: 1 }));
        assert!(DenseMatrix::from_rows(2, 2, &[1.0; 3]).is_err());
        assert!(DenseMatrix::from_rows(0, 2, &[]).is_err());
    }

    #[test]
    fn svd_identity_and_diagonal() {
        let eye = DenseMatrix::identity(3);
        let f = svd_full(&eye).unwrap();
        for s in &f.singular_values {
            assert_abs_diff_eq!(*s, 1.0, epsilon = 1e-12);
        }
        let d = DenseMatrix::from_rows(2, 2, &[3.0, 0.0, 0.0, 0.0]).unwrap();
        let f = svd_full(&d).unwrap();
        assert_abs_diff_eq!(f.singular_values[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.singular_values[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn svd_factors_satisfy_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_matrix(&mut rng, 5, 4);
        let f = svd_full(&m).unwrap();
        assert_eq!(f.left.rows(), 5);
        assert_eq!(f.left.cols(), 5);
        assert_eq!(f.right.rows(), 4);
        assert_eq!(f.right.cols(), 4);
        // orthogonality
        let u = f.left.as_dmatrix();
        let id = u.transpose() * u;
        assert!((id - DMatrix::<f64>::identity(5, 5)).norm() < 1e-10);
        let v = f.right.as_dmatrix();
        let id = v.transpose() * v;
        assert!((id - DMatrix::<f64>::identity(4, 4)).norm() < 1e-10);
        // sorted non-increasing, non-negative
        for w in f.singular_values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(f.singular_values.iter().all(|s| *s >= 0.0));
        // multiply-back
        let rec = f.reconstruct();
        let rel = (rec.as_dmatrix() - m.as_dmatrix()).norm() / m.as_dmatrix().norm();
        assert!(rel < 1e-10, "reconstruction rel error {rel}");
    }

    #[test]
    fn svd_reconstruction_holds_over_random_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..100 {
            let rows = rng.random_range(1..=50);
            let cols = rng.random_range(1..=50);
            let m = random_matrix(&mut rng, rows, cols);
            let f = svd_full(&m).unwrap();
            let rec = f.reconstruct();
            let denom = m.as_dmatrix().norm().max(1e-300);
            let rel = (rec.as_dmatrix() - m.as_dmatrix()).norm() / denom;
            assert!(rel < 1e-10, "trial {trial}: rel error {rel}");
        }
    }

    #[test]
    fn nuclear_norm_cases() {
        let d = DenseMatrix::from_rows(2, 2, &[3.0, 0.0, 0.0, 2.0]).unwrap();
        assert_abs_diff_eq!(nuclear_norm(&d).unwrap(), 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(nuclear_norm(&DenseMatrix::zeros(3, 2)).unwrap(), 0.0);
        // rank-1 outer product u v^T with ||u|| = ||v|| = 2 has sigma_1 = 4
        let u = [2.0, 0.0, 0.0];
        let v = [0.0, 2.0];
        let m = DenseMatrix::from_fn(3, 2, |i, j| u[i] * v[j]).unwrap();
        assert_abs_diff_eq!(nuclear_norm(&m).unwrap(), 4.0, epsilon = 1e-10);
    }

    #[test]
    fn nuclear_dominates_frobenius() {
        // equality iff rank <= 1
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_matrix(&mut rng, 4, 1);
        let v = random_matrix(&mut rng, 3, 1);
        let rank1 =
            DenseMatrix::try_from_dmatrix(u.as_dmatrix() * v.as_dmatrix().transpose()).unwrap();
        let nn = nuclear_norm(&rank1).unwrap();
        let fr = fro_norm(&rank1);
        assert_abs_diff_eq!(nn, fr, epsilon = 1e-10);

        let rank2 = DenseMatrix::from_rows(2, 2, &[3.0, 0.0, 0.0, 2.0]).unwrap();
        let nn = nuclear_norm(&rank2).unwrap();
        let fr = fro_norm(&rank2);
        assert!(nn > fr + 1e-6);
        assert!(fr >= 0.0);

        for _ in 0..20 {
            let m = random_matrix(&mut rng, 5, 4);
            assert!(nuclear_norm(&m).unwrap() >= fro_norm(&m) - 1e-10);
        }
    }

    #[test]
    fn elementwise_norms() {
        let m = DenseMatrix::from_rows(2, 2, &[1.0, -2.0, 0.0, 3.0]).unwrap();
        assert_abs_diff_eq!(l1_norm(&m), 6.0);
        let m = DenseMatrix::from_rows(1, 2, &[3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(fro_norm(&m), 5.0);
        let z = DenseMatrix::zeros(2, 3);
        assert_abs_diff_eq!(l1_norm(&z), 0.0);
        assert_abs_diff_eq!(fro_norm(&z), 0.0);
    }

    #[test]
    fn logsum_cases() {
        let z = DenseMatrix::zeros(2, 2);
        assert_abs_diff_eq!(logsum_norm(&z, 1.0).unwrap(), 0.0);
        let m = DenseMatrix::from_rows(1, 1, &[std::f64::consts::E - 1.0]).unwrap();
        assert_abs_diff_eq!(logsum_norm(&m, 1.0).unwrap(), 1.0, epsilon = 1e-12);
        assert!(logsum_norm(&z, 0.0).is_err());
        assert!(logsum_norm(&z, -1.0).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(&mut rng, 3, 3);
        let mut oracle = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                oracle += (m.get(i, j).abs() + 0.01).ln();
            }
        }
        assert_abs_diff_eq!(logsum_norm(&m, 0.01).unwrap(), oracle, epsilon = 1e-12);
    }

    #[test]
    fn logsum_monotone_in_magnitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_matrix(&mut rng, 3, 3);
        let base = logsum_norm(&m, 0.1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut bumped = m.entries_row_major();
                let idx = i * 3 + j;
                bumped[idx] += bumped[idx].signum() * 0.05;
                let b = DenseMatrix::from_rows(3, 3, &bumped).unwrap();
                assert!(logsum_norm(&b, 0.1).unwrap() >= base);
            }
        }
    }

    #[test]
    fn objective_cases() {
        let z = DenseMatrix::zeros(2, 2);
        assert_abs_diff_eq!(lhr_objective(&z, &z, 1.0, 1.0, 1.0).unwrap(), 0.0);

        let a = DenseMatrix::from_rows(2, 2, &[std::f64::consts::E - 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(
            lhr_objective(&a, &z, 1.0, 1.0, 1.0).unwrap(),
            1.0,
            epsilon = 1e-12
        );

        // compose from primitive oracles on a random pair
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random_matrix(&mut rng, 4, 4);
        let e = random_matrix(&mut rng, 4, 4);
        let (lambda, d1, d2) = (0.7, 0.05, 0.2);
        let f = svd_full(&a).unwrap();
        let mut oracle: f64 = f.singular_values.iter().map(|s| (s + d2).ln()).sum();
        oracle += lambda * logsum_norm(&e, d1).unwrap();
        assert_abs_diff_eq!(
            lhr_objective(&a, &e, lambda, d1, d2).unwrap(),
            oracle,
            epsilon = 1e-10
        );

        let bad = DenseMatrix::zeros(2, 3);
        assert!(lhr_objective(&a, &bad, 1.0, 1.0, 1.0).is_err());
        assert!(lhr_objective(&a, &e, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn objective_invariant_under_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_matrix(&mut rng, 4, 4);
        let e = random_matrix(&mut rng, 4, 4);
        let base = lhr_objective(&a, &e, 0.5, 0.1, 0.1).unwrap();
        for _ in 0..5 {
            // random orthogonal factors from the SVD of a random matrix
            let g = random_matrix(&mut rng, 4, 4);
            let f = svd_full(&g).unwrap();
            let q1 = f.left.as_dmatrix().clone();
            let q2 = f.right.as_dmatrix().clone();
            let rotated =
                DenseMatrix::try_from_dmatrix(&q1 * a.as_dmatrix() * q2.transpose()).unwrap();
            let obj = lhr_objective(&rotated, &e, 0.5, 0.1, 0.1).unwrap();
            assert_abs_diff_eq!(obj, base, epsilon = 1e-9);
        }
    }

    #[test]
    fn csv_round_trip_and_diagnostics() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = random_matrix(&mut rng, 3, 4);
        let text = m.to_csv();
        let back = DenseMatrix::from_csv(&text).unwrap();
        assert_eq!(m, back);

        // scientific notation accepted
        let sci = DenseMatrix::from_csv("1e-3,2.5E2\n-3e0,4\n").unwrap();
        assert_abs_diff_eq!(sci.get(0, 0), 1e-3);
        assert_abs_diff_eq!(sci.get(0, 1), 250.0);

        let err = DenseMatrix::from_csv("1,2\n3\n").unwrap_err();
        assert!(matches!(err, MatError::Csv { line: 2, .. }));
        let err = DenseMatrix::from_csv("1,abc\n").unwrap_err();
        assert!(matches!(err, MatError::Csv { line: 1, .. }));
        assert!(DenseMatrix::from_csv("").is_err());
        assert!(DenseMatrix::from_csv("1,inf\n").is_err());
    }
}
