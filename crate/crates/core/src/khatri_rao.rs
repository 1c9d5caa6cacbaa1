//! Khatri-Rao decompositions `A ≈ B ⊙ C` and cascades `A ≈ A_1 ⊙ A_2 ⊙ … ⊙ A_k`.
//!
//! Every update is a family of independent 1-D least-squares problems. The
//! general form is [`update_middle`]: with `A = B ⊙ W ⊙ C`, `B` being
//! `m1 x N`, `W` being `n x N` and `C` being `m2 x N`, row `p·n·m2 + i·m2 + q`
//! of column `j` equals `b_pj · w_ij · c_qj`, so
//!
//! ```text
//! w_ij = Σ_{p,q} b_pj c_qj A[p·n·m2 + i·m2 + q, j] / Σ_{p,q} (b_pj c_qj)²
//! ```
//!
//! [`update_first`] and [`update_last`] are the cases `m1 = 1` and `m2 = 1`
//! with the missing neighbour set to ones. An entry whose denominator is zero
//! keeps its previous value.
//!
//! Masked fitting, which restricts every sum to observed entries, is an
//! extension beyond the unmasked lemmas.

use rand::Rng;

use crate::error::{LowRankError, Result};
use crate::fit::{run_loop, ConvergenceTrace, FitConfig, Progress};
use crate::matops::{khatri_rao_chain, khatri_rao_product, DenseMatrix, MaskMatrix};
use crate::parallel::Executor;

/// Ordered factors sharing a column count; the row counts multiply to `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrFactors {
    pub factors: Vec<DenseMatrix>,
}

impl KrFactors {
    pub fn new(factors: Vec<DenseMatrix>) -> Result<Self> {
        let first = factors
            .first()
            .ok_or_else(|| LowRankError::PreconditionViolation("Khatri-Rao factors: empty list".into()))?;
        if let Some(bad) = factors.iter().find(|f| f.cols() != first.cols()) {
            return Err(LowRankError::ShapeMismatch {
                op: "KrFactors",
                left: first.shape(),
                right: bad.shape(),
            });
        }
        Ok(Self { factors })
    }

    /// Uniform `[-1, 1]` factors with the given row counts and `n` columns.
    pub fn random<R: Rng + ?Sized>(rows: &[usize], n: usize, rng: &mut R) -> Self {
        let factors = rows
            .iter()
            .map(|&r| DenseMatrix::random_uniform(r, n, -1.0, 1.0, rng))
            .collect();
        Self { factors }
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn cols(&self) -> usize {
        self.factors[0].cols()
    }

    pub fn factor_rows(&self) -> Vec<usize> {
        self.factors.iter().map(DenseMatrix::rows).collect()
    }

    pub fn product(&self) -> Result<DenseMatrix> {
        khatri_rao_chain(&self.factors)
    }

    /// Normalizes every column of every factor but the last to unit norm
    /// with its first nonzero entry positive, pushing the scale into the
    /// last factor. The product is unchanged up to rounding.
    pub fn canonicalize(&mut self) {
        let Some((last, rest)) = self.factors.split_last_mut() else {
            return;
        };
        for j in 0..last.cols() {
            for f in rest.iter_mut() {
                let col = f.col(j);
                let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    continue;
                }
                let lead = col.iter().copied().find(|&v| v != 0.0).unwrap_or(1.0);
                let s = norm.copysign(lead);
                f.set_col(j, &col.iter().map(|v| v / s).collect::<Vec<_>>());
                let tail: Vec<f64> = last.col(j).iter().map(|v| v * s).collect();
                last.set_col(j, &tail);
            }
        }
    }
}

/// Rows of column `j` that hold `w_{i,j}` in `B ⊙ W ⊙ C`: for each outer
/// block `p`, rows `p·n·m2 + i·m2 .. p·n·m2 + (i+1)·m2`.
pub fn cascade_index_set(m1: usize, n: usize, m2: usize, i: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(m1 * m2);
    for p in 0..m1 {
        let base = p * n * m2 + i * m2;
        out.extend(base..base + m2);
    }
    out
}

/// `â_ij`: the entries of column `j` at [`cascade_index_set`].
pub fn gather(a: &DenseMatrix, m1: usize, n: usize, m2: usize, i: usize, j: usize) -> Vec<f64> {
    cascade_index_set(m1, n, m2, i)
        .into_iter()
        .map(|r| a.get(r, j))
        .collect()
}

/// Inverse of [`gather`]: writes `values` back into column `j`.
pub fn scatter(a: &mut DenseMatrix, m1: usize, n: usize, m2: usize, i: usize, j: usize, values: &[f64]) {
    for (r, &v) in cascade_index_set(m1, n, m2, i).into_iter().zip(values) {
        a.set(r, j, v);
    }
}

/// `B` given `C` for `A ≈ B ⊙ C`: `b_ij = ⟨c_j, a_ij⟩ / ⟨c_j, c_j⟩`.
pub fn update_first(a: &DenseMatrix, c: &DenseMatrix, prev: &DenseMatrix) -> Result<DenseMatrix> {
    let ones = DenseMatrix::ones(1, c.cols());
    update_middle(a, &ones, c, prev)
}

/// `C` given `B` for `A ≈ B ⊙ C`, over the strided rows `i, i+m2, …` of each column.
pub fn update_last(a: &DenseMatrix, b: &DenseMatrix, prev: &DenseMatrix) -> Result<DenseMatrix> {
    let ones = DenseMatrix::ones(1, b.cols());
    update_middle(a, b, &ones, prev)
}

/// `W` given `B` and `C` for `A ≈ B ⊙ W ⊙ C`.
pub fn update_middle(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix, prev: &DenseMatrix) -> Result<DenseMatrix> {
    update_middle_with(a, b, c, prev, None, &Executor::new(1))
}

/// [`update_middle`] restricted to observed entries.
pub fn update_middle_masked(
    a: &DenseMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
    prev: &DenseMatrix,
    mask: &MaskMatrix,
) -> Result<DenseMatrix> {
    update_middle_with(a, b, c, prev, Some(mask), &Executor::new(1))
}

fn update_middle_with(
    a: &DenseMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
    prev: &DenseMatrix,
    mask: Option<&MaskMatrix>,
    exec: &Executor,
) -> Result<DenseMatrix> {
    let cols = a.cols();
    let (m1, m2, n) = (b.rows(), c.rows(), prev.rows());
    if b.cols() != cols || c.cols() != cols || prev.cols() != cols {
        return Err(LowRankError::ShapeMismatch {
            op: "khatri_rao update: column count",
            left: a.shape(),
            right: (prev.rows(), prev.cols()),
        });
    }
    if m1 * n * m2 != a.rows() {
        return Err(LowRankError::ShapeMismatch {
            op: "khatri_rao update: row product",
            left: a.shape(),
            right: (m1 * n * m2, cols),
        });
    }
    if let Some(m) = mask {
        m.check_shape("khatri_rao mask", a.shape())?;
    }
    let rows = exec.map(n, |i| {
        (0..cols)
            .map(|j| {
                let (mut num, mut den) = (0.0, 0.0);
                for p in 0..m1 {
                    let bpj = b.get(p, j);
                    let base = p * n * m2 + i * m2;
                    for q in 0..m2 {
                        let r = base + q;
                        if mask.is_none_or(|m| m.is_observed(r, j)) {
                            let g = bpj * c.get(q, j);
                            num += g * a.get(r, j);
                            den += g * g;
                        }
                    }
                }
                if den == 0.0 {
                    prev.get(i, j)
                } else {
                    num / den
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(DenseMatrix::from_vec(n, cols, rows.concat()))
}

/// `‖A_1 ⊙ … ⊙ A_k − A‖_F²`, over observed entries when masked.
pub fn kr_loss(a: &DenseMatrix, f: &KrFactors, mask: Option<&MaskMatrix>) -> Result<f64> {
    let p = f.product()?;
    if p.shape() != a.shape() {
        return Err(LowRankError::ShapeMismatch {
            op: "kr_loss",
            left: a.shape(),
            right: p.shape(),
        });
    }
    match mask {
        Some(m) => crate::matops::masked_frobenius_loss(a, &p, m),
        None => Ok(p.sub(a)?.frobenius_norm_sq()),
    }
}

/// Alternating `B` / `C` updates for a two-factor decomposition.
pub fn fit_pair(a: &DenseMatrix, cfg: &FitConfig, init: KrFactors) -> Result<(KrFactors, ConvergenceTrace)> {
    if init.len() != 2 {
        return Err(LowRankError::PreconditionViolation(format!(
            "fit_pair needs 2 factors, got {}",
            init.len()
        )));
    }
    sweep_fit(a, None, cfg, init)
}

/// Cyclic sweeps over `k ≥ 2` factors. Factor `t` is updated with
/// `B = A_1 ⊙ … ⊙ A_{t−1}` and `C = A_{t+1} ⊙ … ⊙ A_k` (ones at the ends).
pub fn fit_cascade(a: &DenseMatrix, cfg: &FitConfig, init: KrFactors) -> Result<(KrFactors, ConvergenceTrace)> {
    sweep_fit(a, None, cfg, init)
}

/// [`fit_cascade`] on observed entries only.
pub fn fit_cascade_masked(
    a: &DenseMatrix,
    mask: &MaskMatrix,
    cfg: &FitConfig,
    init: KrFactors,
) -> Result<(KrFactors, ConvergenceTrace)> {
    mask.check_shape("fit_cascade_masked", a.shape())?;
    sweep_fit(a, Some(mask), cfg, init)
}

fn sweep_fit(
    a: &DenseMatrix,
    mask: Option<&MaskMatrix>,
    cfg: &FitConfig,
    init: KrFactors,
) -> Result<(KrFactors, ConvergenceTrace)> {
    let init = KrFactors::new(init.factors)?;
    if init.len() < 2 {
        return Err(LowRankError::PreconditionViolation(
            "a cascade needs at least 2 factors".into(),
        ));
    }
    let rows: usize = init.factor_rows().iter().product();
    if (rows, init.cols()) != a.shape() {
        return Err(LowRankError::ShapeMismatch {
            op: "khatri_rao fit",
            left: a.shape(),
            right: (rows, init.cols()),
        });
    }
    let exec = Executor::new(cfg.threads);
    let n = init.cols();
    let mut f = init;
    let initial = Progress::same(kr_loss(a, &f, mask)?);
    let trace = run_loop(cfg, initial, |_| {
        for t in 0..f.len() {
            let left = neighbours(&f.factors[..t], n)?;
            let right = neighbours(&f.factors[t + 1..], n)?;
            f.factors[t] = update_middle_with(a, &left, &right, &f.factors[t], mask, &exec)?;
        }
        Ok(Progress::same(kr_loss(a, &f, mask)?))
    })?;
    f.canonicalize();
    Ok((f, trace))
}

fn neighbours(group: &[DenseMatrix], n: usize) -> Result<DenseMatrix> {
    match group {
        [] => Ok(DenseMatrix::ones(1, n)),
        [only] => Ok(only.clone()),
        [first, rest @ ..] => rest
            .iter()
            .try_fold(first.clone(), |acc, x| khatri_rao_product(&acc, x)),
    }
}
