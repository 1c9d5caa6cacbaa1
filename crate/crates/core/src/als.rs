//! Alternating least squares for `A ≈ WZ`: plain, ℓ2-regularized, and masked
//! (column-by-column / row-by-row) matrix completion.
//!
//! Every half-step is an exact minimizer of the objective in one factor, so
//! the plain and regularized objectives never increase across iterations.

use rand::Rng;

use crate::error::{LowRankError, Result};
use crate::fit::{run_loop, ConvergenceTrace, FitConfig, Progress};
use crate::linalg::{gram_of_rows, SpdFactor};
use crate::matops::{masked_frobenius_loss, numerical_rank, DenseMatrix, MaskMatrix, DEFAULT_REL_TOL};
use crate::parallel::Executor;

/// Redraws allowed when a random initialization comes out rank deficient.
const FULL_RANK_ATTEMPTS: usize = 5;

/// `W` (`M x K`) and `Z` (`K x N`).
#[derive(Debug, Clone, PartialEq)]
pub struct AlsFactors {
    pub w: DenseMatrix,
    pub z: DenseMatrix,
}

impl AlsFactors {
    pub fn new(w: DenseMatrix, z: DenseMatrix) -> Result<Self> {
        if w.cols() != z.rows() {
            return Err(LowRankError::ShapeMismatch {
                op: "AlsFactors",
                left: w.shape(),
                right: z.shape(),
            });
        }
        Ok(Self { w, z })
    }

    /// Entries i.i.d. uniform on `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(m: usize, n: usize, k: usize, rng: &mut R) -> Self {
        let w = DenseMatrix::random_uniform(m, k, -1.0, 1.0, rng);
        let z = DenseMatrix::random_uniform(k, n, -1.0, 1.0, rng);
        Self { w, z }
    }

    /// Like [`AlsFactors::random`] but redraws until both factors have rank `k`.
    pub fn random_full_rank<R: Rng + ?Sized>(m: usize, n: usize, k: usize, rng: &mut R) -> Result<Self> {
        for _ in 0..FULL_RANK_ATTEMPTS {
            let f = Self::random(m, n, k, rng);
            if f.has_full_rank() {
                return Ok(f);
            }
        }
        Err(LowRankError::PreconditionViolation(format!(
            "no full-rank initialization after {FULL_RANK_ATTEMPTS} draws"
        )))
    }

    pub fn rank(&self) -> usize {
        self.w.cols()
    }

    pub fn has_full_rank(&self) -> bool {
        let k = self.rank();
        numerical_rank(&self.w, DEFAULT_REL_TOL) == k && numerical_rank(&self.z, DEFAULT_REL_TOL) == k
    }

    pub fn product(&self) -> DenseMatrix {
        self.w.matmul(&self.z).expect("factor shapes checked at construction")
    }
}

/// `Z = (WᵀW + λI)⁻¹ WᵀA`.
pub fn update_z_closed_form(w: &DenseMatrix, a: &DenseMatrix, lambda_z: f64) -> Result<DenseMatrix> {
    if w.rows() != a.rows() {
        return Err(LowRankError::ShapeMismatch {
            op: "update_z_closed_form",
            left: w.shape(),
            right: a.shape(),
        });
    }
    let factor = SpdFactor::new(&gram_of_rows(w), lambda_z)?;
    let rhs = w.transpose().matmul(a)?;
    Ok(factor.solve(&rhs))
}

/// `Wᵀ = (ZZᵀ + λI)⁻¹ ZAᵀ`.
pub fn update_w_closed_form(z: &DenseMatrix, a: &DenseMatrix, lambda_w: f64) -> Result<DenseMatrix> {
    if z.cols() != a.cols() {
        return Err(LowRankError::ShapeMismatch {
            op: "update_w_closed_form",
            left: z.shape(),
            right: a.shape(),
        });
    }
    let zt = z.transpose();
    let factor = SpdFactor::new(&gram_of_rows(&zt), lambda_w)?;
    let rhs = z.matmul(&a.transpose())?;
    Ok(factor.solve(&rhs).transpose())
}

/// Regularized least squares on the observed rows of one column:
/// `z_n = (W[o,:]ᵀW[o,:] + λI)⁻¹ W[o,:]ᵀ a_n[o]`.
///
/// An empty observation set yields the zero vector when `λ > 0`.
pub fn update_z_column_masked(w: &DenseMatrix, a_col: &[f64], obs: &[usize], lambda_z: f64) -> Result<Vec<f64>> {
    if a_col.len() != w.rows() {
        return Err(LowRankError::ShapeMismatch {
            op: "update_z_column_masked",
            left: w.shape(),
            right: (a_col.len(), 1),
        });
    }
    if let Some(&bad) = obs.iter().find(|&&i| i >= w.rows()) {
        return Err(LowRankError::IndexOutOfRange {
            index: bad,
            len: w.rows(),
        });
    }
    let k = w.cols();
    if obs.is_empty() {
        return if lambda_z > 0.0 {
            Ok(vec![0.0; k])
        } else {
            Err(LowRankError::EmptyObservation)
        };
    }
    let w_obs = w.select_rows(obs);
    let factor = SpdFactor::new(&gram_of_rows(&w_obs), lambda_z)?;
    let rhs: Vec<f64> = (0..k)
        .map(|c| obs.iter().enumerate().map(|(r, &i)| w_obs.get(r, c) * a_col[i]).sum())
        .collect();
    Ok(factor.solve_vec(&rhs))
}

/// Row mirror of [`update_z_column_masked`]:
/// `w_m = (Z[:,p]Z[:,p]ᵀ + λI)⁻¹ Z[:,p] b_m[p]`.
pub fn update_w_row_masked(z: &DenseMatrix, b_row: &[f64], obs: &[usize], lambda_w: f64) -> Result<Vec<f64>> {
    if b_row.len() != z.cols() {
        return Err(LowRankError::ShapeMismatch {
            op: "update_w_row_masked",
            left: z.shape(),
            right: (1, b_row.len()),
        });
    }
    update_z_column_masked(&z.transpose(), b_row, obs, lambda_w)
}

/// Unregularized ALS. Requires a square target, `K < M`, zero
/// regularization and full-rank initial factors.
pub fn fit_plain(a: &DenseMatrix, cfg: &FitConfig, init: AlsFactors) -> Result<(AlsFactors, ConvergenceTrace)> {
    let (m, n) = a.shape();
    let k = init.rank();
    if cfg.lambda_w != 0.0 || cfg.lambda_z != 0.0 {
        return Err(LowRankError::PreconditionViolation(
            "plain ALS requires lambda_w == lambda_z == 0".into(),
        ));
    }
    if m != n {
        return Err(LowRankError::PreconditionViolation(format!(
            "plain ALS requires a square target, got {m}x{n}"
        )));
    }
    if k >= m {
        return Err(LowRankError::PreconditionViolation(format!(
            "plain ALS requires K < M, got K={k}, M={m}"
        )));
    }
    check_factor_shapes(a, &init)?;
    if !init.has_full_rank() {
        return Err(LowRankError::PreconditionViolation(
            "initial factors must have full rank".into(),
        ));
    }

    let mut f = init;
    let initial = Progress::same(residual_norm(a, &f));
    let trace = run_loop(cfg, initial, |_| {
        f.z = update_z_closed_form(&f.w, a, 0.0)?;
        f.w = update_w_closed_form(&f.z, a, 0.0)?;
        Ok(Progress::same(residual_norm(a, &f)))
    })?;
    Ok((f, trace))
}

/// ALS with `λ_w‖W‖² + λ_z‖Z‖²`. Stops on `‖A − WZ‖_F ≤ tol`; the trace
/// records the full regularized objective, which is monotone.
pub fn fit_regularized(a: &DenseMatrix, cfg: &FitConfig, init: AlsFactors) -> Result<(AlsFactors, ConvergenceTrace)> {
    if !(cfg.lambda_w > 0.0 && cfg.lambda_z > 0.0) {
        return Err(LowRankError::PreconditionViolation(
            "regularized ALS requires lambda_w > 0 and lambda_z > 0".into(),
        ));
    }
    check_factor_shapes(a, &init)?;
    let mut f = init;
    let progress = |f: &AlsFactors| Progress {
        stop: residual_norm(a, f),
        traced: regularized_objective(a, f, cfg.lambda_w, cfg.lambda_z),
    };
    let initial = progress(&f);
    let trace = run_loop(cfg, initial, |_| {
        f.z = update_z_closed_form(&f.w, a, cfg.lambda_z)?;
        f.w = update_w_closed_form(&f.z, a, cfg.lambda_w)?;
        Ok(progress(&f))
    })?;
    Ok((f, trace))
}

/// Matrix completion by per-column then per-row regularized solves. Stops on
/// the squared masked loss `‖M∘A − M∘(WZ)‖_F² ≤ tol`, which is also traced.
pub fn fit_masked(
    a: &DenseMatrix,
    mask: &MaskMatrix,
    cfg: &FitConfig,
    init: AlsFactors,
) -> Result<(AlsFactors, ConvergenceTrace)> {
    if !(cfg.lambda_w > 0.0 && cfg.lambda_z > 0.0) {
        return Err(LowRankError::PreconditionViolation(
            "masked ALS requires lambda_w > 0 and lambda_z > 0".into(),
        ));
    }
    mask.check_shape("fit_masked", a.shape())?;
    check_factor_shapes(a, &init)?;
    let (m, n) = a.shape();
    let col_obs: Vec<Vec<usize>> = (0..n).map(|j| mask.observed_rows(j)).collect();
    let row_obs: Vec<Vec<usize>> = (0..m).map(|i| mask.observed_cols(i)).collect();
    let a_cols: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let exec = Executor::new(cfg.threads);

    let mut f = init;
    let loss = |f: &AlsFactors| masked_frobenius_loss(a, &f.product(), mask);
    let initial = Progress::same(loss(&f)?);
    let trace = run_loop(cfg, initial, |_| {
        let w = &f.w;
        let cols = exec.map(n, |j| update_z_column_masked(w, &a_cols[j], &col_obs[j], cfg.lambda_z));
        for (j, col) in cols.into_iter().enumerate() {
            f.z.set_col(j, &col?);
        }
        let zt = f.z.transpose();
        let rows = exec.map(m, |i| update_z_column_masked(&zt, a.row(i), &row_obs[i], cfg.lambda_w));
        for (i, row) in rows.into_iter().enumerate() {
            f.w.row_mut(i).copy_from_slice(&row?);
        }
        Ok(Progress::same(loss(&f)?))
    })?;
    Ok((f, trace))
}

/// `‖WZ − A‖_F² + λ_w‖W‖_F² + λ_z‖Z‖_F²`.
pub fn regularized_objective(a: &DenseMatrix, f: &AlsFactors, lambda_w: f64, lambda_z: f64) -> f64 {
    residual_norm(a, f).powi(2) + lambda_w * f.w.frobenius_norm_sq() + lambda_z * f.z.frobenius_norm_sq()
}

/// `(∇_Z, ∇_W)` of the regularized objective:
/// `2Wᵀ(WZ − A) + 2λ_zZ` and `2(WZ − A)Zᵀ + 2λ_wW`.
pub fn gradients(a: &DenseMatrix, f: &AlsFactors, lambda_w: f64, lambda_z: f64) -> Result<(DenseMatrix, DenseMatrix)> {
    let r = f.product().sub(a)?;
    let gz = f.w.transpose().matmul(&r)?.scale(2.0).add(&f.z.scale(2.0 * lambda_z))?;
    let gw = r.matmul(&f.z.transpose())?.scale(2.0).add(&f.w.scale(2.0 * lambda_w))?;
    Ok((gz, gw))
}

fn residual_norm(a: &DenseMatrix, f: &AlsFactors) -> f64 {
    let p = f.product();
    a.as_slice()
        .iter()
        .zip(p.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn check_factor_shapes(a: &DenseMatrix, f: &AlsFactors) -> Result<()> {
    if f.w.rows() != a.rows() || f.z.cols() != a.cols() || f.w.cols() != f.z.rows() {
        return Err(LowRankError::ShapeMismatch {
            op: "als factors",
            left: a.shape(),
            right: (f.w.rows(), f.z.cols()),
        });
    }
    Ok(())
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::fit::StopReason;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Normal equations for one column solved by Gaussian elimination with
    /// partial pivoting, independent of the Cholesky path.
    fn lstsq_column(w: &DenseMatrix, b: &[f64], lambda: f64) -> Vec<f64> {
        let k = w.cols();
        let mut aug = vec![vec![0.0; k + 1]; k];
        for r in 0..k {
            for c in 0..k {
                aug[r][c] =
                    (0..w.rows()).map(|i| w.get(i, r) * w.get(i, c)).sum::<f64>() + if r == c { lambda } else { 0.0 };
            }
            aug[r][k] = (0..w.rows()).map(|i| w.get(i, r) * b[i]).sum();
        }
        for p in 0..k {
            let piv = (p..k)
                .max_by(|&x, &y| aug[x][p].abs().total_cmp(&aug[y][p].abs()))
                .unwrap();
            aug.swap(p, piv);
            for r in 0..k {
                if r != p {
                    let f = aug[r][p] / aug[p][p];
                    for c in p..=k {
                        aug[r][c] -= f * aug[p][c];
                    }
                }
            }
        }
        (0..k).map(|r| aug[r][k] / aug[r][r]).collect()
    }

    #[test]
    fn z_update_self_representation_and_identity_design() {
        let mut g = rng(1);
        let a = DenseMatrix::random_uniform(4, 4, -1.0, 1.0, &mut g);
        let z = update_z_closed_form(&a, &a, 0.0).unwrap();
        assert!(z.max_abs_diff(&DenseMatrix::identity(4)) < 1e-10);

        let b = DenseMatrix::random_uniform(3, 5, -1.0, 1.0, &mut g);
        for lambda in [0.0, 0.5, 2.0] {
            let z = update_z_closed_form(&DenseMatrix::identity(3), &b, lambda).unwrap();
            assert!(z.max_abs_diff(&b.scale(1.0 / (1.0 + lambda))) < 1e-14);
        }
    }

    #[test]
    fn z_update_matches_per_column_oracle() {
        let mut g = rng(2);
        let w = DenseMatrix::random_uniform(6, 2, -1.0, 1.0, &mut g);
        let a = DenseMatrix::random_uniform(6, 5, -1.0, 1.0, &mut g);
        let z = update_z_closed_form(&w, &a, 0.0).unwrap();
        for j in 0..5 {
            let oracle = lstsq_column(&w, &a.col(j), 0.0);
            for r in 0..2 {
                assert!((z.get(r, j) - oracle[r]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn z_update_rejects_singular_gram() {
        let w = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]);
        let a = DenseMatrix::ones(3, 2);
        assert!(matches!(
            update_z_closed_form(&w, &a, 0.0),
            Err(LowRankError::SingularNormalEquations)
        ));
        assert!(update_z_closed_form(&w, &a, 1e-3).is_ok());
    }

    #[test]
    fn w_update_identity_and_symmetry() {
        let i3 = DenseMatrix::identity(3);
        assert!(update_w_closed_form(&i3, &i3, 0.0).unwrap().max_abs_diff(&i3) < 1e-15);

        let mut g = rng(3);
        let z = DenseMatrix::random_uniform(2, 7, -1.0, 1.0, &mut g);
        let a = DenseMatrix::random_uniform(5, 7, -1.0, 1.0, &mut g);
        for lambda in [0.0, 0.3] {
            let w = update_w_closed_form(&z, &a, lambda).unwrap();
            let via_z = update_z_closed_form(&z.transpose(), &a.transpose(), lambda)
                .unwrap()
                .transpose();
            assert!(w.max_abs_diff(&via_z) < 1e-12);
        }
    }

    #[test]
    fn w_update_exact_factorization_fixed_point() {
        let mut g = rng(4);
        let w0 = DenseMatrix::random_uniform(6, 2, -1.0, 1.0, &mut g);
        let z = DenseMatrix::random_uniform(2, 5, -1.0, 1.0, &mut g);
        let a = w0.matmul(&z).unwrap();
        let w = update_w_closed_form(&z, &a, 0.0).unwrap();
        assert!(w.matmul(&z).unwrap().max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn closed_forms_are_stationary() {
        let mut g = rng(5);
        let a = DenseMatrix::random_uniform(7, 6, -1.0, 1.0, &mut g);
        for (lw, lz) in [(0.0, 0.0), (0.1, 0.2)] {
            let mut f = AlsFactors::random(7, 6, 3, &mut g);
            f.z = update_z_closed_form(&f.w, &a, lz).unwrap();
            let (gz, _) = gradients(&a, &f, lw, lz).unwrap();
            assert!(gz.max_abs() < 1e-8);
            f.w = update_w_closed_form(&f.z, &a, lw).unwrap();
            let (_, gw) = gradients(&a, &f, lw, lz).unwrap();
            assert!(gw.max_abs() < 1e-8);
        }
    }

    #[test]
    fn masked_column_update_cases() {
        let mut g = rng(6);
        let w = DenseMatrix::random_uniform(5, 2, -1.0, 1.0, &mut g);
        let a = DenseMatrix::random_uniform(5, 3, -1.0, 1.0, &mut g);
        let z = update_z_closed_form(&w, &a, 0.1).unwrap();
        let all: Vec<usize> = (0..5).collect();
        for j in 0..3 {
            let zj = update_z_column_masked(&w, &a.col(j), &all, 0.1).unwrap();
            for r in 0..2 {
                assert!((zj[r] - z.get(r, j)).abs() < 1e-12);
            }
        }

        // K = 1, single observation: z = w a / (w² + λ)
        let w1 = DenseMatrix::column(&[0.0, 1.5, 0.0]);
        let z1 = update_z_column_masked(&w1, &[9.0, 2.0, 9.0], &[1], 0.25).unwrap();
        assert!((z1[0] - 1.5 * 2.0 / (1.5 * 1.5 + 0.25)).abs() < 1e-15);

        assert_eq!(update_z_column_masked(&w, &a.col(0), &[], 0.1).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(
            update_z_column_masked(&w, &a.col(0), &[], 0.0),
            Err(LowRankError::EmptyObservation)
        ));
    }

    #[test]
    fn masked_row_update_cases() {
        let mut g = rng(7);
        let z = DenseMatrix::random_uniform(2, 6, -1.0, 1.0, &mut g);
        let a = DenseMatrix::random_uniform(4, 6, -1.0, 1.0, &mut g);
        let w = update_w_closed_form(&z, &a, 0.2).unwrap();
        let all: Vec<usize> = (0..6).collect();
        let obs = [0usize, 2, 5];
        for i in 0..4 {
            let wi = update_w_row_masked(&z, a.row(i), &all, 0.2).unwrap();
            for c in 0..2 {
                assert!((wi[c] - w.get(i, c)).abs() < 1e-12);
            }
            let sub = update_w_row_masked(&z, a.row(i), &obs, 0.2).unwrap();
            let via_t = update_z_column_masked(&z.transpose(), a.row(i), &obs, 0.2).unwrap();
            assert_eq!(sub, via_t);
            let oracle = lstsq_column(&z.transpose().select_rows(&obs), &obs.map(|j| a.get(i, j)), 0.2);
            for c in 0..2 {
                assert!((sub[c] - oracle[c]).abs() < 1e-12);
            }
        }
        assert_eq!(update_w_row_masked(&z, a.row(0), &[], 0.2).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn fit_plain_recovers_planted() {
        let mut g = rng(8);
        let truth = AlsFactors::random(8, 8, 3, &mut g);
        let a = truth.product();
        let cfg = FitConfig {
            rank: 3,
            tol: 1e-12,
            max_iters: 200,
            ..Default::default()
        };
        let init = AlsFactors::random_full_rank(8, 8, 3, &mut g).unwrap();
        let (f, trace) = fit_plain(&a, &cfg, init).unwrap();
        assert!(f.product().sub(&a).unwrap().frobenius_norm() / a.frobenius_norm() < 1e-8);
        assert!(trace.is_non_increasing(1e-10));
    }

    #[test]
    fn fit_plain_fixed_point_and_preconditions() {
        let mut g = rng(9);
        let init = AlsFactors::random_full_rank(5, 5, 2, &mut g).unwrap();
        let a = init.product();
        let cfg = FitConfig {
            rank: 2,
            tol: 1e-12,
            ..Default::default()
        };
        let (_, trace) = fit_plain(&a, &cfg, init.clone()).unwrap();
        assert_eq!(trace.iterations(), 0);
        assert_eq!(trace.stop, StopReason::Tolerance);

        let rect = DenseMatrix::ones(5, 4);
        assert!(matches!(
            fit_plain(&rect, &cfg, init.clone()),
            Err(LowRankError::PreconditionViolation(_))
        ));
        let reg = FitConfig {
            lambda_w: 0.1,
            ..cfg.clone()
        };
        assert!(matches!(
            fit_plain(&a, &reg, init.clone()),
            Err(LowRankError::PreconditionViolation(_))
        ));
        let deficient = AlsFactors::new(DenseMatrix::ones(5, 2), init.z.clone()).unwrap();
        assert!(matches!(
            fit_plain(&a, &cfg, deficient),
            Err(LowRankError::PreconditionViolation(_))
        ));
    }

    #[test]
    fn rank_preserved_by_updates() {
        let mut g = rng(10);
        for _ in 0..5 {
            let a = DenseMatrix::random_uniform(6, 6, -1.0, 1.0, &mut g);
            let f = AlsFactors::random_full_rank(6, 6, 3, &mut g).unwrap();
            let z = update_z_closed_form(&f.w, &a, 0.0).unwrap();
            assert_eq!(numerical_rank(&z, DEFAULT_REL_TOL), 3);
            let w = update_w_closed_form(&f.z, &a, 0.0).unwrap();
            assert_eq!(numerical_rank(&w, DEFAULT_REL_TOL), 3);
        }
    }

    #[test]
    fn fit_regularized_cases() {
        let mut g = rng(11);
        // zero target: factors shrink, objective monotone
        let a = DenseMatrix::zeros(6, 6);
        let cfg = FitConfig {
            rank: 2,
            lambda_w: 0.1,
            lambda_z: 0.1,
            tol: 0.0,
            max_iters: 20,
            ..Default::default()
        };
        let init = AlsFactors::random(6, 6, 2, &mut g);
        let n0 = init.w.frobenius_norm() + init.z.frobenius_norm();
        let (f, trace) = fit_regularized(&a, &cfg, init).unwrap();
        assert!(trace.is_non_increasing(1e-10));
        assert!(trace.final_loss() >= 0.0);
        assert!(f.w.frobenius_norm() + f.z.frobenius_norm() < n0);

        // rectangular target is fine
        let a = DenseMatrix::random_uniform(12, 7, -1.0, 1.0, &mut g);
        let cfg = FitConfig {
            rank: 2,
            lambda_w: 1e-3,
            lambda_z: 1e-3,
            tol: 0.0,
            max_iters: 30,
            ..Default::default()
        };
        let (_, trace) = fit_regularized(&a, &cfg, AlsFactors::random(12, 7, 2, &mut g)).unwrap();
        assert_eq!(trace.iterations(), 30);
        assert!(trace.is_non_increasing(1e-10));

        let bad = FitConfig { lambda_w: 0.0, ..cfg };
        assert!(fit_regularized(&a, &bad, AlsFactors::random(12, 7, 2, &mut g)).is_err());
    }

    #[test]
    fn fit_regularized_tiny_lambda_recovers() {
        let mut g = rng(12);
        let a = AlsFactors::random(10, 8, 2, &mut g).product();
        let cfg = FitConfig {
            rank: 2,
            lambda_w: 1e-12,
            lambda_z: 1e-12,
            tol: 0.0,
            max_iters: 300,
            ..Default::default()
        };
        let (f, _) = fit_regularized(&a, &cfg, AlsFactors::random(10, 8, 2, &mut g)).unwrap();
        assert!(f.product().sub(&a).unwrap().frobenius_norm() / a.frobenius_norm() < 1e-6);
    }

    #[test]
    fn fit_masked_handles_unobserved_column() {
        let mut g = rng(13);
        let a = AlsFactors::random(6, 5, 2, &mut g).product();
        let mask = MaskMatrix::from_fn(6, 5, |_, j| j != 3);
        let cfg = FitConfig {
            rank: 2,
            lambda_w: 1e-3,
            lambda_z: 1e-3,
            tol: 0.0,
            max_iters: 5,
            ..Default::default()
        };
        let (f, trace) = fit_masked(&a, &mask, &cfg, AlsFactors::random(6, 5, 2, &mut g)).unwrap();
        assert_eq!(trace.iterations(), 5);
        assert_eq!(f.z.col(3), vec![0.0, 0.0]);
    }

    #[test]
    fn fit_masked_thread_count_does_not_change_result() {
        let mut g = rng(14);
        let a = AlsFactors::random(9, 7, 2, &mut g).product();
        let mask = MaskMatrix::random(9, 7, 0.7, &mut g);
        let init = AlsFactors::random(9, 7, 2, &mut g);
        let cfg = FitConfig {
            rank: 2,
            lambda_w: 1e-3,
            lambda_z: 1e-3,
            tol: 0.0,
            max_iters: 4,
            ..Default::default()
        };
        let (f1, _) = fit_masked(&a, &mask, &cfg, init.clone()).unwrap();
        let (f4, _) = fit_masked(&a, &mask, &FitConfig { threads: 4, ..cfg }, init).unwrap();
        assert_eq!(f1, f4);
    }
}
