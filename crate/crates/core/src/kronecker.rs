//! Nearest Kronecker product `A ≈ B ⊗ C` under a uniform blocking, fitted by
//! alternating closed-form scalar least squares.
//!
//! With `C` fixed every `b_ij` solves its own 1-D problem on block `A_ij`;
//! with `B` fixed every `c_kl` solves one on the strided block `Ã_kl`. Masked
//! variants restrict both sums to observed entries.

use rand::Rng;

use crate::error::{LowRankError, Result};
use crate::fit::{run_loop, ConvergenceTrace, FitConfig, Progress};
use crate::matops::{DenseMatrix, MaskMatrix};
use crate::parallel::Executor;

/// `A` is `m1 x n1` blocks, each `m2 x n2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BlockingScheme {
    pub m1: usize,
    pub m2: usize,
    pub n1: usize,
    pub n2: usize,
}

impl BlockingScheme {
    pub fn new(m1: usize, m2: usize, n1: usize, n2: usize) -> Result<Self> {
        if [m1, m2, n1, n2].contains(&0) {
            return Err(LowRankError::PreconditionViolation(format!(
                "blocking dimensions must be positive, got {m1}x{m2},{n1}x{n2}"
            )));
        }
        Ok(Self { m1, m2, n1, n2 })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.m1 * self.m2, self.n1 * self.n2)
    }

    pub fn check(&self, shape: (usize, usize)) -> Result<()> {
        if self.shape() != shape {
            return Err(LowRankError::ShapeMismatch {
                op: "blocking scheme",
                left: shape,
                right: self.shape(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KronFactors {
    pub b: DenseMatrix,
    pub c: DenseMatrix,
}

impl KronFactors {
    pub fn new(b: DenseMatrix, c: DenseMatrix) -> Self {
        Self { b, c }
    }

    /// Uniform `[-1, 1]` entries.
    pub fn random<R: Rng + ?Sized>(s: &BlockingScheme, rng: &mut R) -> Self {
        let b = DenseMatrix::random_uniform(s.m1, s.n1, -1.0, 1.0, rng);
        let c = DenseMatrix::random_uniform(s.m2, s.n2, -1.0, 1.0, rng);
        Self { b, c }
    }

    pub fn scheme(&self) -> BlockingScheme {
        BlockingScheme {
            m1: self.b.rows(),
            m2: self.c.rows(),
            n1: self.b.cols(),
            n2: self.c.cols(),
        }
    }

    pub fn product(&self) -> Result<DenseMatrix> {
        crate::matops::kronecker_product(&self.b, &self.c)
    }
}

fn check_index(index: usize, len: usize) -> Result<()> {
    if index >= len {
        return Err(LowRankError::IndexOutOfRange { index, len });
    }
    Ok(())
}

/// Contiguous block `A[i·m2 .. (i+1)·m2, j·n2 .. (j+1)·n2]`.
pub fn block_at(a: &DenseMatrix, s: &BlockingScheme, i: usize, j: usize) -> Result<DenseMatrix> {
    s.check(a.shape())?;
    check_index(i, s.m1)?;
    check_index(j, s.n1)?;
    Ok(a.submatrix(i * s.m2, j * s.n2, s.m2, s.n2))
}

/// Strided block: rows `i, i+m2, …` and columns `j, j+n2, …`.
pub fn strided_block_at(a: &DenseMatrix, s: &BlockingScheme, i: usize, j: usize) -> Result<DenseMatrix> {
    s.check(a.shape())?;
    check_index(i, s.m2)?;
    check_index(j, s.n2)?;
    Ok(DenseMatrix::from_fn(s.m1, s.n1, |p, q| {
        a.get(p * s.m2 + i, q * s.n2 + j)
    }))
}

fn check_mask(a: &DenseMatrix, mask: Option<&MaskMatrix>) -> Result<()> {
    match mask {
        Some(m) => m.check_shape("kronecker mask", a.shape()),
        None => Ok(()),
    }
}

/// Closed-form `B` given `C`: `b_ij = Σ(A_ij∘C∘M_ij) / Σ(C∘C∘M_ij)`
/// (`M ≡ 1` when unmasked).
///
/// Unmasked, `Σ(C∘C) = 0` is an error. Masked, an entry whose denominator
/// vanishes (no observed data) keeps its value from `prev`.
pub fn update_b(
    a: &DenseMatrix,
    s: &BlockingScheme,
    c: &DenseMatrix,
    mask: Option<&MaskMatrix>,
    prev: &DenseMatrix,
) -> Result<DenseMatrix> {
    update_b_with(a, s, c, mask, prev, &Executor::new(1))
}

/// Closed-form `C` given `B` over strided blocks; mirror of [`update_b`].
pub fn update_c(
    a: &DenseMatrix,
    s: &BlockingScheme,
    b: &DenseMatrix,
    mask: Option<&MaskMatrix>,
    prev: &DenseMatrix,
) -> Result<DenseMatrix> {
    update_c_with(a, s, b, mask, prev, &Executor::new(1))
}

fn update_b_with(
    a: &DenseMatrix,
    s: &BlockingScheme,
    c: &DenseMatrix,
    mask: Option<&MaskMatrix>,
    prev: &DenseMatrix,
    exec: &Executor,
) -> Result<DenseMatrix> {
    s.check(a.shape())?;
    check_mask(a, mask)?;
    expect_shape("update_b: C", c, (s.m2, s.n2))?;
    expect_shape("update_b: previous B", prev, (s.m1, s.n1))?;
    if mask.is_none() && c.frobenius_norm_sq() == 0.0 {
        return Err(LowRankError::ZeroDenominator("update_b: C is zero".into()));
    }
    let rows = exec.map(s.m1, |i| {
        (0..s.n1)
            .map(|j| {
                let (mut num, mut den) = (0.0, 0.0);
                for k in 0..s.m2 {
                    for l in 0..s.n2 {
                        let (r, q) = (i * s.m2 + k, j * s.n2 + l);
                        if mask.is_none_or(|m| m.is_observed(r, q)) {
                            let ckl = c.get(k, l);
                            num += a.get(r, q) * ckl;
                            den += ckl * ckl;
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
    Ok(DenseMatrix::from_vec(s.m1, s.n1, rows.concat()))
}

fn update_c_with(
    a: &DenseMatrix,
    s: &BlockingScheme,
    b: &DenseMatrix,
    mask: Option<&MaskMatrix>,
    prev: &DenseMatrix,
    exec: &Executor,
) -> Result<DenseMatrix> {
    s.check(a.shape())?;
    check_mask(a, mask)?;
    expect_shape("update_c: B", b, (s.m1, s.n1))?;
    expect_shape("update_c: previous C", prev, (s.m2, s.n2))?;
    if mask.is_none() && b.frobenius_norm_sq() == 0.0 {
        return Err(LowRankError::ZeroDenominator("update_c: B is zero".into()));
    }
    let rows = exec.map(s.m2, |k| {
        (0..s.n2)
            .map(|l| {
                let (mut num, mut den) = (0.0, 0.0);
                for i in 0..s.m1 {
                    for j in 0..s.n1 {
                        let (r, q) = (i * s.m2 + k, j * s.n2 + l);
                        if mask.is_none_or(|m| m.is_observed(r, q)) {
                            let bij = b.get(i, j);
                            num += a.get(r, q) * bij;
                            den += bij * bij;
                        }
                    }
                }
                if den == 0.0 {
                    prev.get(k, l)
                } else {
                    num / den
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(DenseMatrix::from_vec(s.m2, s.n2, rows.concat()))
}

fn expect_shape(op: &'static str, x: &DenseMatrix, shape: (usize, usize)) -> Result<()> {
    if x.shape() != shape {
        return Err(LowRankError::ShapeMismatch {
            op,
            left: x.shape(),
            right: shape,
        });
    }
    Ok(())
}

/// `Σ (b_ij c_kl − A[i·m2+k, j·n2+l])²` over observed entries, without
/// materializing `B ⊗ C`.
pub fn kron_loss(a: &DenseMatrix, f: &KronFactors, mask: Option<&MaskMatrix>) -> Result<f64> {
    let s = f.scheme();
    s.check(a.shape())?;
    check_mask(a, mask)?;
    let mut total = 0.0;
    for i in 0..s.m1 {
        for k in 0..s.m2 {
            let r = i * s.m2 + k;
            for j in 0..s.n1 {
                let bij = f.b.get(i, j);
                for l in 0..s.n2 {
                    let q = j * s.n2 + l;
                    if mask.is_none_or(|m| m.is_observed(r, q)) {
                        let e = bij * f.c.get(k, l) - a.get(r, q);
                        total += e * e;
                    }
                }
            }
        }
    }
    Ok(total)
}

/// Alternates `B` then `C` updates until the (masked) squared loss drops
/// to `cfg.tol` or the iteration cap is hit.
pub fn fit(
    a: &DenseMatrix,
    s: &BlockingScheme,
    cfg: &FitConfig,
    init: KronFactors,
    mask: Option<&MaskMatrix>,
) -> Result<(KronFactors, ConvergenceTrace)> {
    s.check(a.shape())?;
    check_mask(a, mask)?;
    if init.scheme() != *s {
        return Err(LowRankError::ShapeMismatch {
            op: "kronecker::fit init",
            left: (init.b.rows() * init.c.rows(), init.b.cols() * init.c.cols()),
            right: s.shape(),
        });
    }
    let exec = Executor::new(cfg.threads);
    let mut f = init;
    let initial = Progress::same(kron_loss(a, &f, mask)?);
    let trace = run_loop(cfg, initial, |_| {
        f.b = update_b_with(a, s, &f.c, mask, &f.b, &exec)?;
        f.c = update_c_with(a, s, &f.b, mask, &f.c, &exec)?;
        Ok(Progress::same(kron_loss(a, &f, mask)?))
    })?;
    Ok((f, trace))
}
