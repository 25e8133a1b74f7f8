//! Synthetic planted instances and the feasible-region phase scan.
//!
//! Instances follow the random factor model: A* = X Y^T with standard normal
//! factors, plus a sparse error matrix with uniformly sampled support and
//! values uniform in [-100, 100].

use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::admm::SolverConfig;
use crate::error::MatError;
use crate::mat::{fro_norm, DenseMatrix};
use crate::mm::{lhr_solve_rpca, pcp_solve};

/// One generated recovery problem with its ground truth.
#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub p: DenseMatrix,
    pub a_star: DenseMatrix,
    pub e_star: DenseMatrix,
    /// rank(A*) / max(m, n).
    pub rank_rate: f64,
    /// ||E*||_0 / (m n).
    pub error_rate: f64,
    pub seed: u64,
}

/// splitmix64, used to derive independent sub-seeds deterministically.
fn mix(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut s = mix(base);
    for t in tags {
        s = mix(s ^ t.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    }
    s
}

/// A* = X Y^T with X (rows x rank) and Y (cols x rank) filled with independent
/// standard normal draws from a seeded generator.
pub fn gen_low_rank(rows: usize, cols: usize, rank: usize, seed: u64) -> Result<DenseMatrix, MatError> {
    if rank > rows.min(cols) {
        return Err(MatError::InvalidArgument(format!(
            "rank {rank} exceeds min dimension of a {rows}x{cols} matrix"
        )));
    }
    if rank == 0 {
        return Ok(DenseMatrix::zeros(rows, cols));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let mut x = vec![0.0f64; rows * rank];
    for v in x.iter_mut() {
        *v = normal.sample(&mut rng);
    }
    let mut y = vec![0.0f64; cols * rank];
    for v in y.iter_mut() {
        *v = normal.sample(&mut rng);
    }
    DenseMatrix::from_fn(rows, cols, |i, j| {
        let mut acc = 0.0;
        for k in 0..rank {
            acc += x[i * rank + k] * y[j * rank + k];
        }
        acc
    })
}

/// floor(rate * rows * cols) support positions drawn uniformly without
/// replacement, values uniform on [-100, 100], zeros elsewhere.
pub fn gen_sparse_errors(
    rows: usize,
    cols: usize,
    error_rate: f64,
    seed: u64,
) -> Result<DenseMatrix, MatError> {
    if !(0.0..=1.0).contains(&error_rate) {
        return Err(MatError::InvalidArgument(format!(
            "error rate must lie in [0, 1], got {error_rate}"
        )));
    }
    let total = rows * cols;
    let count = (error_rate * total as f64).floor() as usize;
    let mut entries = vec![0.0f64; total];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support = rand::seq::index::sample(&mut rng, total, count);
    for idx in support.iter() {
        entries[idx] = rng.random_range(-100.0..100.0);
    }
    DenseMatrix::from_rows(rows, cols, &entries)
}

/// P = A* + E* with rank(A*) = `rank` and floor(error_rate * m * n) errors.
pub fn planted_instance(
    rows: usize,
    cols: usize,
    rank: usize,
    error_rate: f64,
    seed: u64,
) -> Result<PlantedInstance, MatError> {
    let a_star = gen_low_rank(rows, cols, rank, derive_seed(seed, &[1]))?;
    let e_star = gen_sparse_errors(rows, cols, error_rate, derive_seed(seed, &[2]))?;
    let p = DenseMatrix::try_from_dmatrix(a_star.as_dmatrix() + e_star.as_dmatrix())?;
    Ok(PlantedInstance {
        p,
        a_star,
        e_star,
        rank_rate: rank as f64 / rows.max(cols) as f64,
        error_rate,
        seed,
    })
}

/// Instance at phase coordinates (eta, xi): rank = round(eta * max(m,n))
/// capped at min(m,n).
pub fn planted_instance_at_rates(
    rows: usize,
    cols: usize,
    eta: f64,
    xi: f64,
    seed: u64,
) -> Result<PlantedInstance, MatError> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(MatError::InvalidArgument(format!(
            "rank rate must lie in [0, 1], got {eta}"
        )));
    }
    let rank = ((eta * rows.max(cols) as f64).round() as usize).min(rows.min(cols));
    planted_instance(rows, cols, rank, xi, seed)
}

/// Union-of-subspaces benchmark data for the clustering pipeline: `clusters`
/// orthonormal bases of dimension `subspace_dim` in `ambient` space, each
/// carrying `points_per` Gaussian-coefficient samples, with a fraction
/// `corruption_rate` of entries corrupted by additive uniform [-1, 1] values
/// (about 3x the clean per-entry spread). Returns samples as columns plus
/// ground-truth labels.
pub fn planted_subspaces(
    ambient: usize,
    subspace_dim: usize,
    clusters: usize,
    points_per: usize,
    corruption_rate: f64,
    seed: u64,
) -> Result<(DenseMatrix, Vec<usize>), MatError> {
    if subspace_dim == 0 || subspace_dim > ambient {
        return Err(MatError::InvalidArgument(format!(
            "subspace dimension {subspace_dim} out of range for ambient {ambient}"
        )));
    }
    if clusters == 0 || points_per == 0 {
        return Err(MatError::InvalidArgument(
            "need at least one cluster and one point per cluster".into(),
        ));
    }
    if !(0.0..=1.0).contains(&corruption_rate) {
        return Err(MatError::InvalidArgument(format!(
            "corruption rate must lie in [0, 1], got {corruption_rate}"
        )));
    }
    let n = clusters * points_per;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[3]));
    let normal = StandardNormal;
    let mut points = nalgebra::DMatrix::<f64>::zeros(ambient, n);
    let mut labels = Vec::with_capacity(n);
    for c in 0..clusters {
        let raw = DenseMatrix::from_fn(ambient, subspace_dim, |_, _| normal.sample(&mut rng))?;
        let basis = crate::mat::svd_full(&raw)?.left;
        for p in 0..points_per {
            let col = c * points_per + p;
            let coeff: Vec<f64> = (0..subspace_dim).map(|_| normal.sample(&mut rng)).collect();
            for row in 0..ambient {
                let mut acc = 0.0;
                for (k, z) in coeff.iter().enumerate() {
                    acc += basis.get(row, k) * z;
                }
                points[(row, col)] = acc;
            }
            labels.push(c);
        }
    }
    let total = ambient * n;
    let corrupted = (corruption_rate * total as f64).floor() as usize;
    let support = rand::seq::index::sample(&mut rng, total, corrupted);
    for idx in support.iter() {
        let (row, col) = (idx / n, idx % n);
        points[(row, col)] += rng.random_range(-1.0..1.0);
    }
    Ok((DenseMatrix::try_from_dmatrix(points)?, labels))
}

/// ||a - a*||_F / ||a*||_F, with 0/0 = 0 and x/0 = +inf.
pub fn relative_error(a: &DenseMatrix, a_star: &DenseMatrix) -> f64 {
    let denom = fro_norm(a_star);
    let num = (a.as_dmatrix() - a_star.as_dmatrix()).norm();
    if denom == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / denom
    }
}

/// Which solver a phase scan exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMethod {
    Lhr,
    Pcp,
}

/// A cell is feasible when the median relative recovery error over its trials
/// is at most this.
pub const FEASIBILITY_CUTOFF: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub eta: f64,
    pub xi: f64,
    pub median_rel_error: f64,
    pub feasible: bool,
    pub trials: usize,
}

/// Feasibility map over the (rank rate, error rate) grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub format_version: u32,
    pub method: ScanMethod,
    pub rows: usize,
    pub cols: usize,
    pub trials: usize,
    pub seed: u64,
    pub eta_values: Vec<f64>,
    pub xi_values: Vec<f64>,
    /// Row-major over (eta index, xi index).
    pub cells: Vec<PhaseCell>,
}

impl PhaseGrid {
    pub fn cell(&self, eta_index: usize, xi_index: usize) -> &PhaseCell {
        &self.cells[eta_index * self.xi_values.len() + xi_index]
    }

    pub fn feasible_count(&self) -> usize {
        self.cells.iter().filter(|c| c.feasible).count()
    }

    /// One row per cell: eta, xi, median relative error, feasibility flag.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# lhr-phase-grid v1\neta,xi,median_rel_error,feasible\n");
        for cell in &self.cells {
            out.push_str(&format!(
                "{},{},{},{}\n",
                cell.eta, cell.xi, cell.median_rel_error, cell.feasible
            ));
        }
        out
    }
}

fn grid_values(step: f64) -> Result<Vec<f64>, MatError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(MatError::InvalidArgument(format!(
            "grid step must lie in (0, 1], got {step}"
        )));
    }
    let n = 1.0 / step;
    if (n - n.round()).abs() > 1e-9 {
        return Err(MatError::InvalidArgument(format!(
            "grid step {step} does not divide [0, 1]"
        )));
    }
    let n = n.round() as usize;
    Ok((0..=n).map(|i| (i as f64 * step).min(1.0)).collect())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        let lo = values[n / 2 - 1];
        let hi = values[n / 2];
        if lo.is_infinite() || hi.is_infinite() {
            f64::INFINITY
        } else {
            0.5 * (lo + hi)
        }
    }
}

/// Runs `trials` planted instances per grid cell through the chosen solver
/// and records the median relative recovery error. Solver failures count as
/// infinite-error trials; they never abort the scan. Cells run in parallel on
/// `workers` threads and merge deterministically by index.
#[allow(clippy::too_many_arguments)]
pub fn phase_scan(
    rows: usize,
    cols: usize,
    eta_step: f64,
    xi_step: f64,
    trials: usize,
    method: ScanMethod,
    cfg: &SolverConfig,
    seed: u64,
    workers: usize,
) -> Result<PhaseGrid, MatError> {
    if trials == 0 {
        return Err(MatError::InvalidArgument("trials must be at least 1".into()));
    }
    cfg.validate()?;
    let eta_values = grid_values(eta_step)?;
    let xi_values = grid_values(xi_step)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| MatError::InvalidArgument(format!("worker pool: {e}")))?;

    let coords: Vec<(usize, usize)> = (0..eta_values.len())
        .flat_map(|i| (0..xi_values.len()).map(move |j| (i, j)))
        .collect();

    let cells: Vec<PhaseCell> = pool.install(|| {
        use rayon::prelude::*;
        coords
            .par_iter()
            .map(|&(i, j)| {
                let eta = eta_values[i];
                let xi = xi_values[j];
                let mut errors: Vec<f64> = (0..trials)
                    .map(|t| {
                        let cell_seed =
                            derive_seed(seed, &[i as u64 + 1, j as u64 + 1, t as u64 + 1]);
                        run_trial(rows, cols, eta, xi, cell_seed, method, cfg)
                    })
                    .collect();
                let med = median(&mut errors);
                PhaseCell {
                    eta,
                    xi,
                    median_rel_error: med,
                    feasible: med <= FEASIBILITY_CUTOFF,
                    trials,
                }
            })
            .collect()
    });

    Ok(PhaseGrid {
        format_version: 1,
        method,
        rows,
        cols,
        trials,
        seed,
        eta_values,
        xi_values,
        cells,
    })
}

fn run_trial(
    rows: usize,
    cols: usize,
    eta: f64,
    xi: f64,
    seed: u64,
    method: ScanMethod,
    cfg: &SolverConfig,
) -> f64 {
    let instance = match planted_instance_at_rates(rows, cols, eta, xi, seed) {
        Ok(i) => i,
        Err(_) => return f64::INFINITY,
    };
    let solved = match method {
        ScanMethod::Lhr => lhr_solve_rpca(&instance.p, cfg),
        ScanMethod::Pcp => pcp_solve(&instance.p, cfg),
    };
    match solved {
        Ok(result) => relative_error(&result.a, &instance.a_star),
        Err(_) => f64::INFINITY,
    }
}
