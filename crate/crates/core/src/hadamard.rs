//! Low-rank Hadamard decomposition `A ≈ (C1 D1) ∘ (C2 D2)`.
//!
//! There is no closed form for any factor, so both solvers take plain
//! gradient steps of constant size `cfg.step`:
//!
//! - [`fit`] steps whole factors in the order `C1, D1, C2, D2`.
//! - [`fit_rank_one`] / [`fit_masked`] sweep columns of `D1, D2`, then rows
//!   of `C1, C2`, optionally restricted to observed entries.
//!
//! `cfg.lambda_w` adds `2λX` to the `C` gradients and `cfg.lambda_z` to the
//! `D` gradients; both default to zero.

use rand::Rng;

use crate::error::{LowRankError, Result};
use crate::fit::{run_loop, ConvergenceTrace, FitConfig, Progress};
use crate::matops::{dot, hadamard_product, DenseMatrix, MaskMatrix};
use crate::parallel::Executor;

/// Loss growth (relative to the initial loss) treated as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// `C1, C2` are `M x K`; `D1, D2` are `K x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct HadamardFactors {
    pub c1: DenseMatrix,
    pub d1: DenseMatrix,
    pub c2: DenseMatrix,
    pub d2: DenseMatrix,
}

/// Selects which of the two low-rank products a rank-one gradient refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    First,
    Second,
}

/// How the residual `Δ = (C1D1)∘(C2D2) − A` is refreshed inside one iteration of [`fit_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualMode {
    /// Recompute `Δ` before every factor step (sequential descent).
    #[default]
    Fresh,
    /// Compute `Δ` once per iteration and reuse it for all four steps.
    Stale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HadamardGradients {
    pub c1: DenseMatrix,
    pub d1: DenseMatrix,
    pub c2: DenseMatrix,
    pub d2: DenseMatrix,
}

impl HadamardFactors {
    pub fn new(c1: DenseMatrix, d1: DenseMatrix, c2: DenseMatrix, d2: DenseMatrix) -> Result<Self> {
        let f = Self { c1, d1, c2, d2 };
        f.check()?;
        Ok(f)
    }

    /// Uniform `[-1, 1]` entries scaled by `K^{-1/4}` per factor, so each
    /// product `C D` has `O(1)` entries.
    pub fn random<R: Rng + ?Sized>(m: usize, n: usize, k: usize, rng: &mut R) -> Self {
        let s = (k.max(1) as f64).powf(-0.25);
        let mut draw = |r, c| DenseMatrix::random_uniform(r, c, -1.0, 1.0, rng).scale(s);
        let c1 = draw(m, k);
        let d1 = draw(k, n);
        let c2 = draw(m, k);
        let d2 = draw(k, n);
        Self { c1, d1, c2, d2 }
    }

    pub fn rows(&self) -> usize {
        self.c1.rows()
    }

    pub fn cols(&self) -> usize {
        self.d1.cols()
    }

    pub fn rank(&self) -> usize {
        self.c1.cols()
    }

    fn check(&self) -> Result<()> {
        let (m, k) = self.c1.shape();
        let n = self.d1.cols();
        let ok = self.c2.shape() == (m, k) && self.d1.shape() == (k, n) && self.d2.shape() == (k, n);
        if !ok {
            return Err(LowRankError::ShapeMismatch {
                op: "HadamardFactors",
                left: self.c1.shape(),
                right: self.d2.shape(),
            });
        }
        Ok(())
    }

    fn check_target(&self, a: &DenseMatrix) -> Result<()> {
        self.check()?;
        if a.shape() != (self.rows(), self.cols()) {
            return Err(LowRankError::ShapeMismatch {
                op: "hadamard target",
                left: a.shape(),
                right: (self.rows(), self.cols()),
            });
        }
        Ok(())
    }

    pub fn first_product(&self) -> DenseMatrix {
        self.c1.matmul(&self.d1).expect("checked shapes")
    }

    pub fn second_product(&self) -> DenseMatrix {
        self.c2.matmul(&self.d2).expect("checked shapes")
    }

    /// `(C1 D1) ∘ (C2 D2)`.
    pub fn reconstruct(&self) -> DenseMatrix {
        hadamard_product(&self.first_product(), &self.second_product()).expect("checked shapes")
    }
}

/// `‖(C1D1)∘(C2D2) − A‖_F²`, summed over observed entries when a mask is given.
pub fn hadamard_loss(f: &HadamardFactors, a: &DenseMatrix, mask: Option<&MaskMatrix>) -> Result<f64> {
    f.check_target(a)?;
    if let Some(m) = mask {
        m.check_shape("hadamard_loss", a.shape())?;
    }
    let r = f.reconstruct();
    let mut total = 0.0;
    for (idx, (x, y)) in r.as_slice().iter().zip(a.as_slice()).enumerate() {
        if mask.is_none_or(|m| m.bits()[idx] == 1) {
            total += (x - y) * (x - y);
        }
    }
    Ok(total)
}

/// Gradients of the unregularized loss in all four factors, evaluated at the same point.
pub fn full_gradients(f: &HadamardFactors, a: &DenseMatrix) -> Result<HadamardGradients> {
    f.check_target(a)?;
    let a1 = f.first_product();
    let a2 = f.second_product();
    let delta = hadamard_product(&a1, &a2)?.sub(a)?;
    let (c1, d1) = factor_pair_gradient(&delta, &a2, &f.c1, &f.d1)?;
    let (c2, d2) = factor_pair_gradient(&delta, &a1, &f.c2, &f.d2)?;
    Ok(HadamardGradients { c1, d1, c2, d2 })
}

/// With `G = Δ ∘ other`: `(2 G Dᵀ, 2 Cᵀ G)`.
fn factor_pair_gradient(
    delta: &DenseMatrix,
    other: &DenseMatrix,
    c: &DenseMatrix,
    d: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let g = hadamard_product(delta, other)?;
    Ok((
        g.matmul(&d.transpose())?.scale(2.0),
        c.transpose().matmul(&g)?.scale(2.0),
    ))
}

fn grad_c(
    delta: &DenseMatrix,
    other: &DenseMatrix,
    d: &DenseMatrix,
    c: &DenseMatrix,
    lambda: f64,
) -> Result<DenseMatrix> {
    let g = hadamard_product(delta, other)?.matmul(&d.transpose())?.scale(2.0);
    if lambda == 0.0 {
        Ok(g)
    } else {
        g.add(&c.scale(2.0 * lambda))
    }
}

fn grad_d(
    delta: &DenseMatrix,
    other: &DenseMatrix,
    c: &DenseMatrix,
    d: &DenseMatrix,
    lambda: f64,
) -> Result<DenseMatrix> {
    let g = c.transpose().matmul(&hadamard_product(delta, other)?)?.scale(2.0);
    if lambda == 0.0 {
        Ok(g)
    } else {
        g.add(&d.scale(2.0 * lambda))
    }
}

/// Whole-factor gradient descent with a freshly recomputed residual per step.
pub fn fit(a: &DenseMatrix, cfg: &FitConfig, init: HadamardFactors) -> Result<(HadamardFactors, ConvergenceTrace)> {
    fit_with(a, cfg, init, ResidualMode::Fresh)
}

pub fn fit_with(
    a: &DenseMatrix,
    cfg: &FitConfig,
    init: HadamardFactors,
    mode: ResidualMode,
) -> Result<(HadamardFactors, ConvergenceTrace)> {
    init.check_target(a)?;
    let mut f = init;
    let eta = cfg.step;
    let (lw, lz) = (cfg.lambda_w, cfg.lambda_z);
    let initial = hadamard_loss(&f, a, None)?;
    let guard = DivergenceGuard::new(initial);
    let residual = |f: &HadamardFactors| hadamard_product(&f.first_product(), &f.second_product())?.sub(a);

    let trace = run_loop(cfg, Progress::same(initial), |iter| {
        match mode {
            ResidualMode::Fresh => {
                let a2 = f.second_product();
                let delta = residual(&f)?;
                let g = grad_c(&delta, &a2, &f.d1, &f.c1, lw)?;
                f.c1.axpy_assign(eta, &g)?;
                let delta = residual(&f)?;
                let g = grad_d(&delta, &a2, &f.c1, &f.d1, lz)?;
                f.d1.axpy_assign(eta, &g)?;

                let a1 = f.first_product();
                let delta = residual(&f)?;
                let g = grad_c(&delta, &a1, &f.d2, &f.c2, lw)?;
                f.c2.axpy_assign(eta, &g)?;
                let delta = residual(&f)?;
                let g = grad_d(&delta, &a1, &f.c2, &f.d2, lz)?;
                f.d2.axpy_assign(eta, &g)?;
            }
            ResidualMode::Stale => {
                let delta = residual(&f)?;
                let a2 = f.second_product();
                let g = grad_c(&delta, &a2, &f.d1, &f.c1, lw)?;
                f.c1.axpy_assign(eta, &g)?;
                let g = grad_d(&delta, &a2, &f.c1, &f.d1, lz)?;
                f.d1.axpy_assign(eta, &g)?;
                let a1 = f.first_product();
                let g = grad_c(&delta, &a1, &f.d2, &f.c2, lw)?;
                f.c2.axpy_assign(eta, &g)?;
                let g = grad_d(&delta, &a1, &f.c2, &f.d2, lz)?;
                f.d2.axpy_assign(eta, &g)?;
            }
        }
        let loss = hadamard_loss(&f, a, None)?;
        guard.check(iter, loss)?;
        Ok(Progress::same(loss))
    })?;
    Ok((f, trace))
}

struct DivergenceGuard {
    limit: f64,
}

impl DivergenceGuard {
    fn new(initial: f64) -> Self {
        Self {
            limit: DIVERGENCE_FACTOR * initial.max(f64::MIN_POSITIVE),
        }
    }

    fn check(&self, iter: usize, loss: f64) -> Result<()> {
        if !loss.is_finite() || loss > self.limit {
            return Err(LowRankError::DivergenceDetected {
                iter,
                loss,
                limit: self.limit,
            });
        }
        Ok(())
    }
}

/// `∇L(d_{·,n}) = 2 C[o,:]ᵀ ([(C[o,:] d_n) ∘ a_other[o] − a_n[o]] ∘ a_other[o])`
/// over rows `obs` (all rows when `None`). `Which::Second` swaps the roles
/// of the two products.
pub fn column_gradient_d(
    f: &HadamardFactors,
    a: &DenseMatrix,
    n: usize,
    which: Which,
    obs: Option<&[usize]>,
) -> Result<Vec<f64>> {
    f.check_target(a)?;
    check_index(n, a.cols())?;
    if let Some(o) = obs {
        for &i in o {
            check_index(i, a.rows())?;
        }
    }
    let (c, d, c_o, d_o) = roles_d(f, which);
    let all: Vec<usize>;
    let rows = match obs {
        Some(o) => o,
        None => {
            all = (0..a.rows()).collect();
            &all
        }
    };
    Ok(column_grad_raw(c, &d.col(n), c_o, &d_o.col(n), a, n, rows))
}

/// Row-space mirror of [`column_gradient_d`]:
/// `∇L(c_{·,m}) = 2 D[:,p] ([(D[:,p]ᵀ c_m) ∘ b_other[p] − b_m[p]] ∘ b_other[p])`.
pub fn row_gradient_c(
    f: &HadamardFactors,
    a: &DenseMatrix,
    m: usize,
    which: Which,
    obs: Option<&[usize]>,
) -> Result<Vec<f64>> {
    f.check_target(a)?;
    check_index(m, a.rows())?;
    if let Some(o) = obs {
        for &j in o {
            check_index(j, a.cols())?;
        }
    }
    let (c, d, c_o, d_o) = roles_d(f, which);
    let all: Vec<usize>;
    let cols = match obs {
        Some(o) => o,
        None => {
            all = (0..a.cols()).collect();
            &all
        }
    };
    Ok(row_grad_raw(d, c.row(m), d_o, c_o.row(m), a.row(m), cols))
}

fn roles_d(f: &HadamardFactors, which: Which) -> (&DenseMatrix, &DenseMatrix, &DenseMatrix, &DenseMatrix) {
    match which {
        Which::First => (&f.c1, &f.d1, &f.c2, &f.d2),
        Which::Second => (&f.c2, &f.d2, &f.c1, &f.d1),
    }
}

fn check_index(index: usize, len: usize) -> Result<()> {
    if index >= len {
        return Err(LowRankError::IndexOutOfRange { index, len });
    }
    Ok(())
}

fn column_grad_raw(
    c: &DenseMatrix,
    d_n: &[f64],
    c_other: &DenseMatrix,
    d_other_n: &[f64],
    a: &DenseMatrix,
    n: usize,
    rows: &[usize],
) -> Vec<f64> {
    let mut g = vec![0.0; c.cols()];
    for &i in rows {
        let other = dot(c_other.row(i), d_other_n);
        let r = (dot(c.row(i), d_n) * other - a.get(i, n)) * other;
        for (gk, &cik) in g.iter_mut().zip(c.row(i)) {
            *gk += 2.0 * cik * r;
        }
    }
    g
}

fn row_grad_raw(
    d: &DenseMatrix,
    c_m: &[f64],
    d_other: &DenseMatrix,
    c_other_m: &[f64],
    a_row: &[f64],
    cols: &[usize],
) -> Vec<f64> {
    let k = d.rows();
    let mut g = vec![0.0; k];
    for &j in cols {
        let pred = (0..k).map(|t| c_m[t] * d.get(t, j)).sum::<f64>();
        let other = (0..k).map(|t| c_other_m[t] * d_other.get(t, j)).sum::<f64>();
        let r = (pred * other - a_row[j]) * other;
        for (t, gt) in g.iter_mut().enumerate() {
            *gt += 2.0 * d.get(t, j) * r;
        }
    }
    g
}

/// Rank-one sweeps over the full matrix.
pub fn fit_rank_one(
    a: &DenseMatrix,
    cfg: &FitConfig,
    init: HadamardFactors,
) -> Result<(HadamardFactors, ConvergenceTrace)> {
    rank_one_sweeps(a, None, cfg, init)
}

/// Rank-one sweeps restricted to observed entries; stops on the squared masked loss.
pub fn fit_masked(
    a: &DenseMatrix,
    mask: &MaskMatrix,
    cfg: &FitConfig,
    init: HadamardFactors,
) -> Result<(HadamardFactors, ConvergenceTrace)> {
    mask.check_shape("hadamard::fit_masked", a.shape())?;
    rank_one_sweeps(a, Some(mask), cfg, init)
}

fn rank_one_sweeps(
    a: &DenseMatrix,
    mask: Option<&MaskMatrix>,
    cfg: &FitConfig,
    init: HadamardFactors,
) -> Result<(HadamardFactors, ConvergenceTrace)> {
    init.check_target(a)?;
    let (m, n) = a.shape();
    let col_obs: Vec<Vec<usize>> = (0..n)
        .map(|j| mask.map_or_else(|| (0..m).collect(), |mk| mk.observed_rows(j)))
        .collect();
    let row_obs: Vec<Vec<usize>> = (0..m)
        .map(|i| mask.map_or_else(|| (0..n).collect(), |mk| mk.observed_cols(i)))
        .collect();
    let exec = Executor::new(cfg.threads);
    let eta = cfg.step;
    let (lw, lz) = (cfg.lambda_w, cfg.lambda_z);

    let mut f = init;
    let initial = hadamard_loss(&f, a, mask)?;
    let guard = DivergenceGuard::new(initial);
    let trace = run_loop(cfg, Progress::same(initial), |iter| {
        // columns of D1 then D2; column n only touches column n of each product
        let cols = {
            let f = &f;
            exec.map(n, |j| {
                let rows = &col_obs[j];
                let mut d1 = f.d1.col(j);
                let d2 = f.d2.col(j);
                let g = column_grad_raw(&f.c1, &d1, &f.c2, &d2, a, j, rows);
                step_vec(&mut d1, &g, eta, lz);
                let mut d2 = d2;
                let g = column_grad_raw(&f.c2, &d2, &f.c1, &d1, a, j, rows);
                step_vec(&mut d2, &g, eta, lz);
                (d1, d2)
            })
        };
        for (j, (d1, d2)) in cols.into_iter().enumerate() {
            f.d1.set_col(j, &d1);
            f.d2.set_col(j, &d2);
        }

        let rows = {
            let f = &f;
            exec.map(m, |i| {
                let cols = &row_obs[i];
                let mut c1 = f.c1.row(i).to_vec();
                let c2 = f.c2.row(i);
                let g = row_grad_raw(&f.d1, &c1, &f.d2, c2, a.row(i), cols);
                step_vec(&mut c1, &g, eta, lw);
                let mut c2 = c2.to_vec();
                let g = row_grad_raw(&f.d2, &c2, &f.d1, &c1, a.row(i), cols);
                step_vec(&mut c2, &g, eta, lw);
                (c1, c2)
            })
        };
        for (i, (c1, c2)) in rows.into_iter().enumerate() {
            f.c1.row_mut(i).copy_from_slice(&c1);
            f.c2.row_mut(i).copy_from_slice(&c2);
        }

        let loss = hadamard_loss(&f, a, mask)?;
        guard.check(iter, loss)?;
        Ok(Progress::same(loss))
    })?;
    Ok((f, trace))
}

/// `x -= η (g + 2λx)`
fn step_vec(x: &mut [f64], g: &[f64], eta: f64, lambda: f64) {
    for (xi, &gi) in x.iter_mut().zip(g) {
        *xi -= eta * (gi + 2.0 * lambda * *xi);
    }
}
