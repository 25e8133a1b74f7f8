//! Inner convex solvers: alternating-direction minimization of the weighted
//! nuclear + weighted l1 program, for the matrix-recovery constraint
//! P = A + E and the self-representation constraint P = PA + E.
//!
//! Both programs are split through an auxiliary J = W_Y A W_Z so the nuclear
//! term has a closed-form update. All updates are derived from the single
//! augmented Lagrangian pairing h1 with C1 and h2 with C2:
//!
//!   L = ||J||_* + lambda ||W_E . E||_1 + <C1, h1> + <C2, h2>
//!       + mu/2 (||h1||_F^2 + ||h2||_F^2)
//!
//! One sweep updates E (elementwise shrink), J (singular-value threshold),
//! A (one gradient step on the quadratic), then the multipliers, then grows mu.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MatError, SolveError, SweepResidual};
use crate::mat::{singular_values_only, DenseMatrix};
use crate::prox::{shrink_dmatrix, svt_dmatrix};
use crate::weights::WeightSet;

/// Consecutive sweeps the residual must stay 1e3x above its minimum before
/// the solve is declared divergent.
const DIVERGENCE_PATIENCE: usize = 5;

/// Step-size policy for the A-update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaPolicy {
    /// 1 / (L + eps) with L the gradient Lipschitz bound of the A-objective.
    Auto,
    /// A caller-chosen positive step.
    Fixed(f64),
}

/// Which weight matrices enter the outer stopping statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightDeltaScope {
    /// Concatenate (W_Y, W_Z, W_E).
    All,
    /// Restrict to W_E (sensitivity studies).
    ErrorOnly,
}

/// The constrained program being solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Program {
    /// P = A + E, A low-rank m x n.
    Rpca,
    /// P = PA + E, A the n x n representation.
    Lrr,
}

/// All solver tunables. `None` fields resolve to data-scaled defaults at
/// solve time; see [`SolverConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Sparsity tradeoff. Default: 1/sqrt(max(m,n)) for RPCA, 0.4 for LRR.
    pub lambda: Option<f64>,
    /// Sparse-term regularizer. Default: 0.01 * mean(|P_ij|).
    pub delta1: Option<f64>,
    /// Spectral regularizer. Default: 0.01 * sigma_1(P).
    pub delta2: Option<f64>,
    /// Initial penalty. Default: 1.25 / sigma_1(P).
    pub mu0: Option<f64>,
    /// Penalty growth factor, > 1.
    pub rho: f64,
    /// A-step policy.
    pub gamma: GammaPolicy,
    /// Relative constraint-residual stop for the inner loop.
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    /// Weight-delta stop for the outer loop.
    pub outer_tol: f64,
    pub outer_max_iters: usize,
    /// Reuse the previous outer iterate as the inner starting point. When
    /// false, every inner solve restarts from A = E = 0.
    pub warm_start: bool,
    pub weight_delta_scope: WeightDeltaScope,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            delta1: None,
            delta2: None,
            mu0: None,
            rho: 1.5,
            gamma: GammaPolicy::Auto,
            inner_tol: 1e-7,
            inner_max_iters: 500,
            outer_tol: 1e-5,
            outer_max_iters: 10,
            warm_start: true,
            weight_delta_scope: WeightDeltaScope::All,
        }
    }
}

/// A fully-determined configuration: every data-scaled default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub program: Program,
    pub lambda: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub mu0: f64,
    pub rho: f64,
    pub gamma: GammaPolicy,
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    pub outer_tol: f64,
    pub outer_max_iters: usize,
    pub warm_start: bool,
    pub weight_delta_scope: WeightDeltaScope,
    /// Largest singular value of P, reused by the LRR step size.
    pub sigma1_p: f64,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), MatError> {
        let positive = |name: &str, v: Option<f64>| -> Result<(), MatError> {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(MatError::InvalidArgument(format!(
                        "{name} must be positive, got {v}"
                    )));
                }
            }
            Ok(())
        };
        positive("lambda", self.lambda)?;
        positive("delta1", self.delta1)?;
        positive("delta2", self.delta2)?;
        positive("mu0", self.mu0)?;
        if !(self.rho > 1.0) {
            return Err(MatError::InvalidArgument(format!(
                "rho must exceed 1, got {}",
                self.rho
            )));
        }
        if let GammaPolicy::Fixed(g) = self.gamma {
            if !(g > 0.0) {
                return Err(MatError::InvalidArgument(format!(
                    "fixed gamma must be positive, got {g}"
                )));
            }
        }
        if !(self.inner_tol > 0.0) || !(self.outer_tol > 0.0) {
            return Err(MatError::InvalidArgument(
                "tolerances must be positive".into(),
            ));
        }
        if self.inner_max_iters == 0 || self.outer_max_iters == 0 {
            return Err(MatError::InvalidArgument(
                "iteration caps must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Fills data-scaled defaults from the observation. A zero observation has
    /// no scale; the fallbacks delta1 = delta2 = 0.01 and mu0 = 1.25 are used
    /// (any positive value converges instantly on P = 0).
    pub fn resolve(&self, p: &DenseMatrix, program: Program) -> Result<ResolvedConfig, MatError> {
        self.validate()?;
        let sigma1_p = singular_values_only(p.as_dmatrix())?
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        let mean_abs =
            crate::mat::l1_norm(p) / (p.rows() as f64 * p.cols() as f64);
        let lambda = self.lambda.unwrap_or_else(|| match program {
            Program::Rpca => 1.0 / (p.rows().max(p.cols()) as f64).sqrt(),
            Program::Lrr => 0.4,
        });
        let delta1 = self
            .delta1
            .unwrap_or(if mean_abs > 0.0 { 0.01 * mean_abs } else { 0.01 });
        let delta2 = self
            .delta2
            .unwrap_or(if sigma1_p > 0.0 { 0.01 * sigma1_p } else { 0.01 });
        let mu0 = self
            .mu0
            .unwrap_or(if sigma1_p > 0.0 { 1.25 / sigma1_p } else { 1.25 });
        Ok(ResolvedConfig {
            program,
            lambda,
            delta1,
            delta2,
            mu0,
            rho: self.rho,
            gamma: self.gamma,
            inner_tol: self.inner_tol,
            inner_max_iters: self.inner_max_iters,
            outer_tol: self.outer_tol,
            outer_max_iters: self.outer_max_iters,
            warm_start: self.warm_start,
            weight_delta_scope: self.weight_delta_scope,
            sigma1_p,
        })
    }
}

/// Primal/dual state of the inner loop.
#[derive(Debug, Clone)]
pub struct InnerState {
    pub a: DenseMatrix,
    pub e: DenseMatrix,
    pub j: DenseMatrix,
    pub c1: DenseMatrix,
    pub c2: DenseMatrix,
    pub mu: f64,
    pub iteration: usize,
}

/// Result of one inner solve.
#[derive(Debug, Clone)]
pub struct InnerSolve {
    /// Final state on convergence; the best-residual state if the cap hit.
    pub state: InnerState,
    pub converged: bool,
    pub sweeps: usize,
    pub trace: Vec<SweepResidual>,
}

/// Gradient step for the A-update: 1/(L + eps) with
/// L = 2 (s1(op)^2 + s1(W_Y)^2 s1(W_Z)^2), where s1(op) is the spectral norm
/// of the constraint operator applied to A — 1 for P = A + E, sigma_1(P) for
/// P = PA + E (pass it as `operator_norm_p`).
pub fn step_size(
    w: &WeightSet,
    policy: GammaPolicy,
    operator_norm_p: Option<f64>,
) -> Result<f64, MatError> {
    match policy {
        GammaPolicy::Fixed(g) => Ok(g),
        GammaPolicy::Auto => {
            let s_op = operator_norm_p.unwrap_or(1.0);
            let s_y = singular_values_only(w.w_y.as_dmatrix())?
                .iter()
                .cloned()
                .fold(0.0, f64::max);
            let s_z = singular_values_only(w.w_z.as_dmatrix())?
                .iter()
                .cloned()
                .fold(0.0, f64::max);
            let l = 2.0 * (s_op * s_op + s_y * s_y * s_z * s_z);
            Ok(1.0 / (l + 1e-12))
        }
    }
}

/// Minimizes ||W_Y A W_Z||_* + lambda ||W_E . E||_1 subject to P = A + E.
pub fn rpca_inner_solve(
    p: &DenseMatrix,
    w: &WeightSet,
    cfg: &ResolvedConfig,
    warm: Option<&InnerState>,
) -> Result<InnerSolve, SolveError> {
    inner_solve(Program::Rpca, p, w, cfg, warm)
}

/// Minimizes ||W_Y A W_Z||_* + lambda ||W_E . E||_1 subject to P = PA + E,
/// with the n x n representation A.
pub fn lrr_inner_solve(
    p: &DenseMatrix,
    w: &WeightSet,
    cfg: &ResolvedConfig,
    warm: Option<&InnerState>,
) -> Result<InnerSolve, SolveError> {
    inner_solve(Program::Lrr, p, w, cfg, warm)
}

fn check_weight_shapes(
    program: Program,
    m: usize,
    n: usize,
    w: &WeightSet,
) -> Result<(), MatError> {
    let a_rows = match program {
        Program::Rpca => m,
        Program::Lrr => n,
    };
    let ok = w.w_y.rows() == a_rows
        && w.w_y.cols() == a_rows
        && w.w_z.rows() == n
        && w.w_z.cols() == n
        && w.w_e.rows() == m
        && w.w_e.cols() == n;
    if !ok {
        return Err(MatError::DimensionMismatch(format!(
            "weights (w_y {}x{}, w_z {}x{}, w_e {}x{}) do not match a {}x{} observation ({:?})",
            w.w_y.rows(),
            w.w_y.cols(),
            w.w_z.rows(),
            w.w_z.cols(),
            w.w_e.rows(),
            w.w_e.cols(),
            m,
            n,
            program,
        )));
    }
    Ok(())
}

fn inner_solve(
    program: Program,
    p: &DenseMatrix,
    w: &WeightSet,
    cfg: &ResolvedConfig,
    warm: Option<&InnerState>,
) -> Result<InnerSolve, SolveError> {
    let p_mat = p.as_dmatrix();
    let (m, n) = (p_mat.nrows(), p_mat.ncols());
    check_weight_shapes(program, m, n, w)?;

    let a_rows = match program {
        Program::Rpca => m,
        Program::Lrr => n,
    };
    let norm_p = p_mat.norm();
    let denom = if norm_p > 0.0 { norm_p } else { 1.0 };

    let operator_norm = match program {
        Program::Rpca => None,
        Program::Lrr => Some(cfg.sigma1_p),
    };
    let gamma = step_size(w, cfg.gamma, operator_norm)?;

    let w_y = w.w_y.as_dmatrix();
    let w_z = w.w_z.as_dmatrix();
    let w_e = w.w_e.as_dmatrix();

    // Warm starts reuse (A, E) only; J is re-projected onto the new weights so
    // the splitting starts consistent, and the duals restart at zero with mu0.
    let mut a = match warm {
        Some(state) => state.a.as_dmatrix().clone(),
        None => DMatrix::zeros(a_rows, n),
    };
    let mut e = match warm {
        Some(state) => state.e.as_dmatrix().clone(),
        None => DMatrix::zeros(m, n),
    };
    if a.nrows() != a_rows || a.ncols() != n || e.nrows() != m || e.ncols() != n {
        return Err(MatError::DimensionMismatch("warm-start shape mismatch".into()).into());
    }
    let mut j = w_y * &a * w_z;
    let mut c1 = DMatrix::<f64>::zeros(m, n);
    let mut c2 = DMatrix::<f64>::zeros(a_rows, n);
    let mut mu = cfg.mu0;

    let p_t = match program {
        Program::Rpca => None,
        Program::Lrr => Some(p_mat.transpose()),
    };

    let mut trace: Vec<SweepResidual> = Vec::new();
    let mut best_residual = f64::INFINITY;
    let mut best: Option<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, f64, usize)> = None;
    let mut converged = false;
    let mut sweeps = 0;
    let mut excess_sweeps = 0usize;

    while sweeps < cfg.inner_max_iters {
        sweeps += 1;
        let inv_mu = 1.0 / mu;

        // E-step: shrink around the constraint slack.
        let without_e = match program {
            Program::Rpca => p_mat - &a,
            Program::Lrr => p_mat - p_mat * &a,
        };
        let operand = &without_e + &c1 * inv_mu;
        // Threshold shape (lambda * inv_mu) * w_e keeps the constant-weight
        // lambda absorption exact; see pcp equivalence tests.
        let alphas = w_e * (cfg.lambda * inv_mu);
        e = shrink_dmatrix(&operand, &alphas);

        // J-step on the weighted product.
        let waw = w_y * &a * w_z;
        j = svt_dmatrix(&(&waw - &c2 * inv_mu), inv_mu).map_err(SolveError::Matrix)?;

        // A-step: one gradient step on ||h1 + C1/mu||^2 + ||h2 + C2/mu||^2
        // with the freshest E and J.
        let h1 = &without_e - &e;
        let h2 = &j - &waw;
        let g1 = &h1 + &c1 * inv_mu;
        let g2 = &h2 + &c2 * inv_mu;
        let direction = match program {
            Program::Rpca => &g1 + w_y * &g2 * w_z,
            Program::Lrr => p_t.as_ref().expect("lrr transpose") * &g1 + w_y * &g2 * w_z,
        };
        a += direction * gamma;

        // Dual ascent on the refreshed residuals, then grow the penalty.
        let without_e = match program {
            Program::Rpca => p_mat - &a,
            Program::Lrr => p_mat - p_mat * &a,
        };
        let h1 = &without_e - &e;
        let waw = w_y * &a * w_z;
        let h2 = &j - &waw;
        c1 += &h1 * mu;
        c2 += &h2 * mu;

        let r1 = h1.norm() / denom;
        let r2 = h2.norm() / denom;
        trace.push(SweepResidual {
            constraint: r1,
            splitting: r2,
        });
        let r = r1.max(r2);
        if !r.is_finite() {
            return Err(SolveError::Divergence {
                sweep: sweeps,
                residual: r,
                best: best_residual,
                trace,
            });
        }
        if r < best_residual {
            best_residual = r;
            best = Some((a.clone(), e.clone(), j.clone(), c1.clone(), c2.clone(), mu, sweeps));
        }
        // Penalty growth makes single sweeps spike occasionally; divergence
        // means the residual stays more than 1e3x above its minimum.
        if r > 1e3 * best_residual {
            excess_sweeps += 1;
            if excess_sweeps >= DIVERGENCE_PATIENCE {
                return Err(SolveError::Divergence {
                    sweep: sweeps,
                    residual: r,
                    best: best_residual,
                    trace,
                });
            }
        } else {
            excess_sweeps = 0;
        }

        // Stop on the relative constraint residuals, plus splitting
        // consistency against max(1, ||J||) so the converged iterate honors
        // both feasibility statements.
        let splitting_ok = h2.norm() / j.norm().max(1.0) < cfg.inner_tol;
        mu *= cfg.rho;
        if r < cfg.inner_tol && splitting_ok {
            converged = true;
            break;
        }
    }

    let (fa, fe, fj, fc1, fc2, fmu, fit) = if converged {
        (a, e, j, c1, c2, mu, sweeps)
    } else {
        // Iteration cap: report the best iterate seen.
        best.expect("at least one sweep ran")
    };
    let state = InnerState {
        a: DenseMatrix::try_from_dmatrix(fa).map_err(SolveError::Matrix)?,
        e: DenseMatrix::try_from_dmatrix(fe).map_err(SolveError::Matrix)?,
        j: DenseMatrix::try_from_dmatrix(fj).map_err(SolveError::Matrix)?,
        c1: DenseMatrix::try_from_dmatrix(fc1).map_err(SolveError::Matrix)?,
        c2: DenseMatrix::try_from_dmatrix(fc2).map_err(SolveError::Matrix)?,
        mu: fmu,
        iteration: fit,
    };
    Ok(InnerSolve {
        state,
        converged,
        sweeps,
        trace,
    })
}

/// The weighted surrogate objective ||W_Y A W_Z||_* + lambda ||W_E . E||_1.
pub fn weighted_objective(
    a: &DenseMatrix,
    e: &DenseMatrix,
    w: &WeightSet,
    lambda: f64,
) -> Result<f64, MatError> {
    let waw = w.w_y.as_dmatrix() * a.as_dmatrix() * w.w_z.as_dmatrix();
    let sigma = singular_values_only(&waw)?;
    let nuclear: f64 = sigma.iter().sum();
    let weighted_e: f64 = e
        .as_dmatrix()
        .zip_map(w.w_e.as_dmatrix(), |ev, wv| (wv * ev).abs())
        .sum();
    Ok(nuclear + lambda * weighted_e)
}
