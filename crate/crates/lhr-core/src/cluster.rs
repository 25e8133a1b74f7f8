//! Subspace clustering on top of the low-rank representation: affinity
//! construction, normalized-cut spectral clustering, permutation-invariant
//! error scoring, and the time-series preprocessing used for price data.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::admm::SolverConfig;
use crate::error::{MatError, SolveError};
use crate::mat::{thin_svd, DenseMatrix};
use crate::mm::{lhr_solve_lrr, lrr_baseline_solve};

/// Samples as columns, optional ground-truth labels, target cluster count.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub points: DenseMatrix,
    pub labels: Option<Vec<usize>>,
    pub k: usize,
}

impl LabeledDataset {
    pub fn validate(&self) -> Result<(), MatError> {
        if self.k == 0 || self.points.cols() < self.k {
            return Err(MatError::InvalidArgument(format!(
                "need at least k = {} samples, have {}",
                self.k,
                self.points.cols()
            )));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.points.cols() {
                return Err(MatError::DimensionMismatch(format!(
                    "{} labels for {} samples",
                    labels.len(),
                    self.points.cols()
                )));
            }
            if labels.iter().any(|l| *l >= self.k) {
                return Err(MatError::InvalidArgument(
                    "label index out of range".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Cluster assignments plus the affinity they were computed from.
#[derive(Debug, Clone)]
pub struct ClusterResult {
    pub assignments: Vec<usize>,
    /// Best-permutation clustering error, when labels were supplied.
    pub error_rate: Option<f64>,
    pub affinity: DenseMatrix,
    /// Zero-degree nodes that were placed by nearest centroid in the embedding.
    pub isolated: Vec<usize>,
}

/// Which representation feeds the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrrWeighting {
    /// Reweighted log-sum representation.
    Lhr,
    /// Identity-weight baseline (single convex solve).
    Plain,
}

/// Symmetric non-negative affinity (|A| + |A^T|) / 2 with zeroed diagonal.
pub fn affinity_from_representation(a: &DenseMatrix) -> Result<DenseMatrix, MatError> {
    if a.rows() != a.cols() {
        return Err(MatError::DimensionMismatch(format!(
            "representation must be square, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let m = a.as_dmatrix();
    DenseMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            0.5 * (m[(i, j)].abs() + m[(j, i)].abs())
        }
    })
}

fn kmeans_plus_plus_init(
    data: &DMatrix<f64>,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n = data.nrows();
    let mut centers = Vec::with_capacity(k);
    centers.push(rng.random_range(0..n));
    let mut dist_sq = vec![0.0f64; n];
    while centers.len() < k {
        let last = *centers.last().unwrap();
        for i in 0..n {
            let d = (data.row(i) - data.row(last)).norm_squared();
            if centers.len() == 1 || d < dist_sq[i] {
                dist_sq[i] = d;
            }
        }
        let total: f64 = dist_sq.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, d) in dist_sq.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(next);
    }
    centers
}

/// Lloyd iterations from a k-means++ seed; returns (assignments, inertia).
fn kmeans_once(data: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let n = data.nrows();
    let dim = data.ncols();
    let seeds = kmeans_plus_plus_init(data, k, rng);
    let mut centroids = DMatrix::<f64>::zeros(k, dim);
    for (c, s) in seeds.iter().enumerate() {
        centroids.row_mut(c).copy_from(&data.row(*s));
    }
    let mut assignments = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for i in 0..n {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = (data.row(i) - centroids.row(c)).norm_squared();
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        let mut counts = vec![0usize; k];
        let mut sums = DMatrix::<f64>::zeros(k, dim);
        for i in 0..n {
            counts[assignments[i]] += 1;
            let row = sums.row(i * 0 + assignments[i]) + data.row(i);
            sums.row_mut(assignments[i]).copy_from(&row);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let row = sums.row(c) / counts[c] as f64;
                centroids.row_mut(c).copy_from(&row);
            } else {
                // re-seed an empty cluster at the point farthest from its centroid
                let mut far_i = 0;
                let mut far_d = -1.0;
                for i in 0..n {
                    let d = (data.row(i) - centroids.row(assignments[i])).norm_squared();
                    if d > far_d {
                        far_d = d;
                        far_i = i;
                    }
                }
                centroids.row_mut(c).copy_from(&data.row(far_i));
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut inertia = 0.0;
    for i in 0..n {
        inertia += (data.row(i) - centroids.row(assignments[i])).norm_squared();
    }
    (assignments, inertia)
}

const KMEANS_RESTARTS: usize = 20;

/// Normalized-cut spectral clustering: degree-normalized affinity, top-k
/// eigenvector embedding with unit-normalized rows, then seeded k-means
/// (20 restarts, best inertia). Zero-degree nodes sit at the embedding origin
/// and take the nearest centroid; their indices are reported.
pub fn spectral_cluster(
    affinity: &DenseMatrix,
    k: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), MatError> {
    let n = affinity.rows();
    if affinity.cols() != n {
        return Err(MatError::DimensionMismatch(format!(
            "affinity must be square, got {}x{}",
            n,
            affinity.cols()
        )));
    }
    if k == 0 || k > n {
        return Err(MatError::InvalidArgument(format!(
            "cluster count {k} out of range for {n} samples"
        )));
    }
    if affinity.as_dmatrix().iter().any(|v| *v < 0.0) {
        return Err(MatError::InvalidArgument(
            "affinity entries must be non-negative".into(),
        ));
    }

    let m = affinity.as_dmatrix();
    let mut degrees = vec![0.0f64; n];
    for i in 0..n {
        degrees[i] = m.row(i).sum();
    }
    let isolated: Vec<usize> = (0..n).filter(|i| degrees[*i] == 0.0).collect();
    let inv_sqrt: Vec<f64> = degrees
        .iter()
        .map(|d| if *d > 0.0 { d.powf(-0.5) } else { 1.0 })
        .collect();
    let normalized = DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * m[(i, j)] * inv_sqrt[j]);

    let eigen = normalized.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| {
        eigen.eigenvalues[*b]
            .partial_cmp(&eigen.eigenvalues[*a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(b))
    });
    let mut embedding = DMatrix::<f64>::zeros(n, k);
    for (col, idx) in order.iter().take(k).enumerate() {
        embedding.set_column(col, &eigen.eigenvectors.column(*idx));
    }
    for i in 0..n {
        let norm = embedding.row(i).norm();
        if norm > 0.0 {
            for c in 0..k {
                embedding[(i, c)] /= norm;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let (assignments, inertia) = kmeans_once(&embedding, k, &mut rng);
        if best.as_ref().map_or(true, |(_, bi)| inertia < *bi) {
            best = Some((assignments, inertia));
        }
    }
    Ok((best.expect("at least one restart").0, isolated))
}

/// 1 - (best matched fraction over cluster-label bijections). Exhaustive
/// search for k <= 8; exact subset dynamic programming above that.
pub fn clustering_error(
    assignments: &[usize],
    labels: &[usize],
    k: usize,
) -> Result<f64, MatError> {
    if assignments.len() != labels.len() {
        return Err(MatError::DimensionMismatch(format!(
            "{} assignments vs {} labels",
            assignments.len(),
            labels.len()
        )));
    }
    if assignments.is_empty() {
        return Err(MatError::InvalidArgument("empty assignment".into()));
    }
    if k == 0 || assignments.iter().chain(labels).any(|v| *v >= k) {
        return Err(MatError::InvalidArgument(
            "cluster index out of range".into(),
        ));
    }
    let n = assignments.len();
    let mut counts = vec![vec![0usize; k]; k];
    for (a, l) in assignments.iter().zip(labels) {
        counts[*a][*l] += 1;
    }
    let best = if k <= 8 {
        best_permutation_matches(&counts, k)
    } else {
        best_assignment_matches(&counts, k)
    };
    Ok(1.0 - best as f64 / n as f64)
}

fn best_permutation_matches(counts: &[Vec<usize>], k: usize) -> usize {
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0usize;
    permute(&mut perm, 0, counts, &mut best);
    best
}

fn permute(perm: &mut Vec<usize>, depth: usize, counts: &[Vec<usize>], best: &mut usize) {
    let k = perm.len();
    if depth == k {
        let total: usize = (0..k).map(|i| counts[i][perm[i]]).sum();
        *best = (*best).max(total);
        return;
    }
    for i in depth..k {
        perm.swap(depth, i);
        permute(perm, depth + 1, counts, best);
        perm.swap(depth, i);
    }
}

/// Exact optimal assignment by DP over label subsets: O(k^2 2^k).
fn best_assignment_matches(counts: &[Vec<usize>], k: usize) -> usize {
    let full = 1usize << k;
    let mut dp = vec![0usize; full];
    for mask in 1..full {
        let row = (mask as u32).count_ones() as usize - 1;
        let mut best = 0usize;
        for l in 0..k {
            if mask & (1 << l) != 0 {
                best = best.max(dp[mask ^ (1 << l)] + counts[row][l]);
            }
        }
        dp[mask] = best;
    }
    dp[full - 1]
}

/// Positions whose rolling standard deviation vanished during normalization.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NormalizeReport {
    pub zero_sigma: Vec<(usize, usize)>,
}

impl NormalizeReport {
    pub fn flagged(&self) -> usize {
        self.zero_sigma.len()
    }
}

/// Rolling standardization per column: (p(t) - mean) / std over the inclusive
/// window [t - alpha, t], truncated at the series start; population std.
/// Vanishing-std entries become 0 and are reported.
pub fn normalize_series(
    prices: &DenseMatrix,
    alpha: usize,
) -> Result<(DenseMatrix, NormalizeReport), MatError> {
    if alpha == 0 {
        return Err(MatError::InvalidArgument(
            "window length must be at least 1".into(),
        ));
    }
    let (rows, cols) = (prices.rows(), prices.cols());
    let mut out = DMatrix::<f64>::zeros(rows, cols);
    let mut report = NormalizeReport::default();
    let p = prices.as_dmatrix();
    for c in 0..cols {
        for t in 0..rows {
            let start = t.saturating_sub(alpha);
            let len = (t - start + 1) as f64;
            let mut mean = 0.0;
            for s in start..=t {
                mean += p[(s, c)];
            }
            mean /= len;
            let mut var = 0.0;
            for s in start..=t {
                let d = p[(s, c)] - mean;
                var += d * d;
            }
            var /= len;
            let sigma = var.sqrt();
            // treat numerically-constant windows as zero spread
            if sigma <= 1e-12 * (mean.abs() + 1.0) {
                out[(t, c)] = 0.0;
                report.zero_sigma.push((t, c));
            } else {
                out[(t, c)] = (p[(t, c)] - mean) / sigma;
            }
        }
    }
    Ok((DenseMatrix::try_from_dmatrix(out)?, report))
}

/// Mean-sample centering followed by projection onto the top `dims` left
/// singular vectors. Columns are samples.
pub fn pca_reduce(points: &DenseMatrix, dims: usize) -> Result<DenseMatrix, MatError> {
    let (d, n) = (points.rows(), points.cols());
    if dims == 0 || dims > d.min(n) {
        return Err(MatError::InvalidArgument(format!(
            "target dimension {dims} out of range for {d}x{n} data"
        )));
    }
    let m = points.as_dmatrix();
    let mut mean = nalgebra::DVector::<f64>::zeros(d);
    for j in 0..n {
        mean += m.column(j);
    }
    mean /= n as f64;
    let mut centered = m.clone();
    for j in 0..n {
        centered.set_column(j, &(m.column(j) - &mean));
    }
    let svd = thin_svd(&centered)?;
    let basis = svd.u.columns(0, dims).into_owned();
    DenseMatrix::try_from_dmatrix(basis.transpose() * centered)
}

/// Parsed price table: rows are time points, columns are assets.
#[derive(Debug, Clone)]
pub struct StockData {
    pub dates: Vec<String>,
    pub assets: Vec<String>,
    pub prices: DenseMatrix,
}

fn is_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return false;
    }
    let digits = |r: std::ops::Range<usize>| b[r].iter().all(|c| c.is_ascii_digit());
    if !(digits(0..4) && digits(5..7) && digits(8..10)) {
        return false;
    }
    let month: u32 = s[5..7].parse().unwrap_or(0);
    let day: u32 = s[8..10].parse().unwrap_or(0);
    (1..=12).contains(&month) && (1..=31).contains(&day)
}

/// Reads the stock table format: a header row of asset identifiers after the
/// date column, then one row per time point with an ISO-8601 date and decimal
/// prices. Missing or malformed cells are rejected with row/column positions.
pub fn read_stock_csv(text: &str) -> Result<StockData, MatError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(MatError::Csv {
        line: 0,
        message: "empty stock file".into(),
    })?;
    let header_cells: Vec<&str> = header.split(',').map(str::trim).collect();
    if header_cells.len() < 2 {
        return Err(MatError::Csv {
            line: 1,
            message: "header must list at least one asset after the date column".into(),
        });
    }
    let assets: Vec<String> = header_cells[1..].iter().map(|s| s.to_string()).collect();
    if assets.iter().any(|a| a.is_empty()) {
        return Err(MatError::Csv {
            line: 1,
            message: "empty asset identifier in header".into(),
        });
    }

    let mut dates = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (idx, line) in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != assets.len() + 1 {
            return Err(MatError::Csv {
                line: idx + 1,
                message: format!(
                    "row has {} cells, expected {}",
                    cells.len(),
                    assets.len() + 1
                ),
            });
        }
        if !is_iso_date(cells[0]) {
            return Err(MatError::Csv {
                line: idx + 1,
                message: format!("{:?} is not an ISO-8601 date", cells[0]),
            });
        }
        dates.push(cells[0].to_string());
        for (col, cell) in cells[1..].iter().enumerate() {
            if cell.is_empty() {
                return Err(MatError::Csv {
                    line: idx + 1,
                    message: format!("missing price for asset {:?}", assets[col]),
                });
            }
            let v: f64 = cell.parse().map_err(|_| MatError::Csv {
                line: idx + 1,
                message: format!("cannot parse price {:?} for asset {:?}", cell, assets[col]),
            })?;
            if !v.is_finite() {
                return Err(MatError::Csv {
                    line: idx + 1,
                    message: format!("non-finite price for asset {:?}", assets[col]),
                });
            }
            values.push(v);
        }
    }
    if dates.is_empty() {
        return Err(MatError::Csv {
            line: 0,
            message: "no data rows".into(),
        });
    }
    let prices = DenseMatrix::from_rows(dates.len(), assets.len(), &values)?;
    Ok(StockData {
        dates,
        assets,
        prices,
    })
}

/// Full pipeline: low-rank representation of the columns, affinity, spectral
/// clustering, and best-permutation scoring when labels are present.
pub fn cluster_dataset(
    dataset: &LabeledDataset,
    weighting: LrrWeighting,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<ClusterResult, SolveError> {
    dataset.validate()?;
    let solved = match weighting {
        LrrWeighting::Lhr => lhr_solve_lrr(&dataset.points, cfg)?,
        LrrWeighting::Plain => lrr_baseline_solve(&dataset.points, cfg)?,
    };
    let affinity = affinity_from_representation(&solved.a)?;
    let (assignments, isolated) = spectral_cluster(&affinity, dataset.k, seed)?;
    let error_rate = match &dataset.labels {
        Some(labels) => Some(clustering_error(&assignments, labels, dataset.k)?),
        None => None,
    };
    Ok(ClusterResult {
        assignments,
        error_rate,
        affinity,
        isolated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn affinity_cases() {
        let eye = DenseMatrix::identity(3);
        let aff = affinity_from_representation(&eye).unwrap();
        assert_eq!(aff, DenseMatrix::zeros(3, 3));

        // antisymmetric input: symmetrized absolute value off the diagonal
        let anti = DenseMatrix::from_rows(2, 2, &[0.0, 2.0, -2.0, 0.0]).unwrap();
        let aff = affinity_from_representation(&anti).unwrap();
        assert_abs_diff_eq!(aff.get(0, 1), 2.0);
        assert_abs_diff_eq!(aff.get(1, 0), 2.0);

        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DenseMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0)).unwrap();
        let aff = affinity_from_representation(&a).unwrap();
        assert_eq!(aff.as_dmatrix(), &aff.as_dmatrix().transpose());
        assert!(aff.entries_row_major().iter().all(|v| *v >= 0.0));
        for i in 0..5 {
            assert_eq!(aff.get(i, i), 0.0);
        }

        let rect = DenseMatrix::zeros(2, 3);
        assert!(affinity_from_representation(&rect).is_err());
    }

    #[test]
    fn spectral_splits_disconnected_blocks() {
        // two 3-node cliques, no cross edges
        let mut entries = vec![0.0; 36];
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    entries[i * 6 + j] = 1.0;
                    entries[(i + 3) * 6 + (j + 3)] = 1.0;
                }
            }
        }
        let aff = DenseMatrix::from_rows(6, 6, &entries).unwrap();
        let (assignments, isolated) = spectral_cluster(&aff, 2, 3).unwrap();
        assert!(isolated.is_empty());
        assert_eq!(assignments[0], assignments[1]);
        assert_eq!(assignments[0], assignments[2]);
        assert_eq!(assignments[3], assignments[4]);
        assert_eq!(assignments[3], assignments[5]);
        assert_ne!(assignments[0], assignments[3]);
    }

    #[test]
    fn spectral_single_cluster_and_validation() {
        let aff = DenseMatrix::from_rows(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let (assignments, _) = spectral_cluster(&aff, 1, 0).unwrap();
        assert_eq!(assignments, vec![0, 0]);
        assert_abs_diff_eq!(
            clustering_error(&assignments, &[0, 0], 1).unwrap(),
            0.0
        );

        assert!(spectral_cluster(&aff, 0, 0).is_err());
        assert!(spectral_cluster(&aff, 3, 0).is_err());
        let neg = DenseMatrix::from_rows(2, 2, &[0.0, -1.0, -1.0, 0.0]).unwrap();
        assert!(spectral_cluster(&neg, 1, 0).is_err());
    }

    #[test]
    fn isolated_nodes_are_reported_and_assigned() {
        // 4-node path plus one totally disconnected node
        let mut entries = vec![0.0; 25];
        for (i, j) in [(0, 1), (1, 2), (2, 3)] {
            entries[i * 5 + j] = 1.0;
            entries[j * 5 + i] = 1.0;
        }
        let aff = DenseMatrix::from_rows(5, 5, &entries).unwrap();
        let (assignments, isolated) = spectral_cluster(&aff, 2, 5).unwrap();
        assert_eq!(isolated, vec![4]);
        assert!(assignments[4] < 2);
    }

    #[test]
    fn clustering_error_cases() {
        let labels = vec![0, 0, 1, 1, 2, 2];
        assert_abs_diff_eq!(clustering_error(&labels, &labels, 3).unwrap(), 0.0);
        // any relabeling permutation scores zero
        let permuted: Vec<usize> = labels.iter().map(|l| (l + 1) % 3).collect();
        assert_abs_diff_eq!(clustering_error(&permuted, &labels, 3).unwrap(), 0.0);
        assert_abs_diff_eq!(clustering_error(&labels, &permuted, 3).unwrap(), 0.0);

        let half = vec![0, 0, 1, 1, 2, 0];
        let err = clustering_error(&half, &labels, 3).unwrap();
        assert_abs_diff_eq!(err, 1.0 / 6.0, epsilon = 1e-12);

        assert!(clustering_error(&labels, &labels[..4], 3).is_err());
        assert!(clustering_error(&labels, &labels, 2).is_err());
    }

    #[test]
    fn clustering_error_dp_matches_permutation_search() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..30 {
            let k = 6;
            let n = 60;
            let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let l: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let mut counts = vec![vec![0usize; k]; k];
            for (x, y) in a.iter().zip(&l) {
                counts[*x][*y] += 1;
            }
            assert_eq!(
                best_permutation_matches(&counts, k),
                best_assignment_matches(&counts, k)
            );
        }
    }

    #[test]
    fn random_assignments_score_badly() {
        use rand::{Rng, SeedableRng};
        let k = 10;
        let n = 200;
        let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        let mut total = 0.0;
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let assignments: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            total += clustering_error(&assignments, &labels, k).unwrap();
        }
        let mean = total / 50.0;
        assert!(mean >= 0.7, "mean random error {mean}");
    }

    #[test]
    fn normalization_window_arithmetic() {
        let p = DenseMatrix::from_rows(3, 1, &[1.0, 2.0, 3.0]).unwrap();
        let (out, report) = normalize_series(&p, 2).unwrap();
        // full window at t = 2: mean 2, population sigma sqrt(2/3)
        assert_abs_diff_eq!(out.get(2, 0), (3.0f64 / 2.0).sqrt(), epsilon = 1e-12);
        // t = 0 is a single-sample window: sigma 0, flagged
        assert_eq!(out.get(0, 0), 0.0);
        assert!(report.zero_sigma.contains(&(0, 0)));

        let constant = DenseMatrix::from_fn(5, 2, |_, _| 7.0).unwrap();
        let (out, report) = normalize_series(&constant, 3).unwrap();
        assert_eq!(out, DenseMatrix::zeros(5, 2));
        assert_eq!(report.flagged(), 10);

        assert!(normalize_series(&p, 0).is_err());
    }

    #[test]
    fn normalization_matches_sliding_window_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let p = DenseMatrix::from_fn(20, 3, |_, _| rng.random_range(1.0..10.0)).unwrap();
        let alpha = 4usize;
        let (out, _) = normalize_series(&p, alpha).unwrap();
        for c in 0..3 {
            for t in 0..20usize {
                let start = t.saturating_sub(alpha);
                let window: Vec<f64> = (start..=t).map(|s| p.get(s, c)).collect();
                let mean: f64 = window.iter().sum::<f64>() / window.len() as f64;
                let var: f64 =
                    window.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
                        / window.len() as f64;
                let sigma = var.sqrt();
                let expect = if sigma <= 1e-12 * (mean.abs() + 1.0) {
                    0.0
                } else {
                    (p.get(t, c) - mean) / sigma
                };
                assert_abs_diff_eq!(out.get(t, c), expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn pca_identities() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        // points in a 2-dim subspace reconstruct exactly at dims = 2
        let basis = DenseMatrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0)).unwrap();
        let coeff = DenseMatrix::from_fn(2, 10, |_, _| rng.random_range(-1.0..1.0)).unwrap();
        let pts =
            DenseMatrix::try_from_dmatrix(basis.as_dmatrix() * coeff.as_dmatrix()).unwrap();
        let reduced = pca_reduce(&pts, 2).unwrap();
        // distances in the reduced space match the centered originals
        let mean = {
            let mut v = nalgebra::DVector::<f64>::zeros(6);
            for j in 0..10 {
                v += pts.as_dmatrix().column(j);
            }
            v / 10.0
        };
        for i in 0..10 {
            for j in 0..10 {
                let orig = ((pts.as_dmatrix().column(i) - &mean)
                    - (pts.as_dmatrix().column(j) - &mean))
                    .norm();
                let red =
                    (reduced.as_dmatrix().column(i) - reduced.as_dmatrix().column(j)).norm();
                assert_abs_diff_eq!(orig, red, epsilon = 1e-8);
            }
        }

        // full-rank projection is an isometry on pairwise distances
        let data = DenseMatrix::from_fn(4, 9, |_, _| rng.random_range(-1.0..1.0)).unwrap();
        let full = pca_reduce(&data, 4).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                let orig =
                    (data.as_dmatrix().column(i) - data.as_dmatrix().column(j)).norm();
                let red =
                    (full.as_dmatrix().column(i) - full.as_dmatrix().column(j)).norm();
                assert_abs_diff_eq!(orig, red, epsilon = 1e-8);
            }
        }

        assert!(pca_reduce(&data, 0).is_err());
        assert!(pca_reduce(&data, 5).is_err());
    }

    #[test]
    fn pca_variance_matches_spectrum() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let data = DenseMatrix::from_fn(8, 12, |_, _| rng.random_range(-2.0..2.0)).unwrap();
        let dims = 3;
        let reduced = pca_reduce(&data, dims).unwrap();
        let variance = crate::mat::fro_norm(&reduced).powi(2) / 11.0;

        let m = data.as_dmatrix();
        let mut mean = nalgebra::DVector::<f64>::zeros(8);
        for j in 0..12 {
            mean += m.column(j);
        }
        mean /= 12.0;
        let mut centered = m.clone();
        for j in 0..12 {
            centered.set_column(j, &(m.column(j) - &mean));
        }
        let sigma = crate::mat::svd_full(&DenseMatrix::try_from_dmatrix(centered).unwrap())
            .unwrap()
            .singular_values;
        let expect: f64 = sigma.iter().take(dims).map(|s| s * s).sum::<f64>() / 11.0;
        assert_abs_diff_eq!(variance, expect, epsilon = 1e-10);
    }

    #[test]
    fn stock_csv_parsing_and_diagnostics() {
        let good = "date,AAA,BBB\n2020-01-03,10.5,20.25\n2020-01-10,11,19.5\n";
        let data = read_stock_csv(good).unwrap();
        assert_eq!(data.assets, vec!["AAA", "BBB"]);
        assert_eq!(data.dates.len(), 2);
        assert_abs_diff_eq!(data.prices.get(1, 0), 11.0);

        let bad_date = "date,AAA\n2020-13-03,10\n";
        assert!(matches!(
            read_stock_csv(bad_date),
            Err(MatError::Csv { line: 2, .. })
        ));
        let missing = "date,AAA,BBB\n2020-01-03,10,\n";
        assert!(matches!(
            read_stock_csv(missing),
            Err(MatError::Csv { line: 2, .. })
        ));
        let ragged = "date,AAA,BBB\n2020-01-03,10\n";
        assert!(read_stock_csv(ragged).is_err());
        assert!(read_stock_csv("").is_err());
        assert!(read_stock_csv("date\n").is_err());
    }

    #[test]
    fn pipeline_exact_on_noiseless_subspaces() {
        let (points, labels) = crate::synth::planted_subspaces(20, 3, 2, 12, 0.0, 41).unwrap();
        let dataset = LabeledDataset {
            points,
            labels: Some(labels),
            k: 2,
        };
        let result = cluster_dataset(
            &dataset,
            LrrWeighting::Lhr,
            &SolverConfig::default(),
            7,
        )
        .unwrap();
        assert_eq!(result.error_rate, Some(0.0));
    }

    #[test]
    fn pipeline_handles_corrupted_subspaces() {
        let (points, labels) = crate::synth::planted_subspaces(50, 5, 5, 20, 0.1, 3).unwrap();
        let dataset = LabeledDataset {
            points,
            labels: Some(labels),
            k: 5,
        };
        let result = cluster_dataset(
            &dataset,
            LrrWeighting::Lhr,
            &SolverConfig::default(),
            11,
        )
        .unwrap();
        let err = result.error_rate.unwrap();
        assert!(err <= 0.10, "clustering error {err}");
    }
}
