//! Hadamard, Kronecker, Khatri-Rao and partition-wise Khatri-Rao products.

use super::{DenseMatrix, MaskMatrix};
use crate::error::{LowRankError, Result};

/// Default cap on the number of entries a materialized Kronecker product may have.
pub const DEFAULT_SIZE_CAP: usize = 1 << 24;

/// Entrywise product `a ∘ b`.
pub fn hadamard_product(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    a.mul_entrywise(b)
}

/// `a ⊗ b` with the default size cap.
pub fn kronecker_product(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    kronecker_product_capped(a, b, DEFAULT_SIZE_CAP)
}

/// `a ⊗ b`; block `(i, j)` of the result is `a[i, j] * b`.
pub fn kronecker_product_capped(a: &DenseMatrix, b: &DenseMatrix, cap: usize) -> Result<DenseMatrix> {
    let (i_dim, j_dim) = a.shape();
    let (k_dim, l_dim) = b.shape();
    let rows = i_dim.checked_mul(k_dim);
    let cols = j_dim.checked_mul(l_dim);
    let entries = rows.zip(cols).and_then(|(r, c)| r.checked_mul(c));
    match (rows, cols, entries) {
        (Some(rows), Some(cols), Some(n)) if n <= cap => {
            let mut out = DenseMatrix::zeros(rows, cols);
            for i in 0..i_dim {
                for j in 0..j_dim {
                    let s = a.get(i, j);
                    for k in 0..k_dim {
                        let dst = &mut out.row_mut(i * k_dim + k)[j * l_dim..(j + 1) * l_dim];
                        for (d, &v) in dst.iter_mut().zip(b.row(k)) {
                            *d = s * v;
                        }
                    }
                }
            }
            Ok(out)
        }
        _ => Err(LowRankError::OverflowGuard {
            rows: rows.unwrap_or(usize::MAX),
            cols: cols.unwrap_or(usize::MAX),
            cap,
        }),
    }
}

/// Kronecker product of two vectors.
pub fn kron_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        out.extend(b.iter().map(|&y| x * y));
    }
    out
}

/// Column-matched Kronecker product `a ⊙ b`: column `k` is `a_k ⊗ b_k`.
pub fn khatri_rao_product(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != b.cols() {
        return Err(LowRankError::ShapeMismatch {
            op: "khatri_rao_product",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let (i_dim, n) = a.shape();
    let j_dim = b.rows();
    let mut out = DenseMatrix::zeros(i_dim * j_dim, n);
    for i in 0..i_dim {
        let arow = a.row(i);
        for j in 0..j_dim {
            let brow = b.row(j);
            for (o, (&x, &y)) in out.row_mut(i * j_dim + j).iter_mut().zip(arow.iter().zip(brow)) {
                *o = x * y;
            }
        }
    }
    Ok(out)
}

/// Left-associated Khatri-Rao chain `f[0] ⊙ f[1] ⊙ ...`.
pub fn khatri_rao_chain(factors: &[DenseMatrix]) -> Result<DenseMatrix> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| LowRankError::PreconditionViolation("empty Khatri-Rao chain".into()))?;
    rest.iter()
        .try_fold(first.clone(), |acc, f| khatri_rao_product(&acc, f))
}

/// Column-block widths shared by both operands of a partition-wise Khatri-Rao product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSpec {
    pub left_widths: Vec<usize>,
    pub right_widths: Vec<usize>,
}

impl PartitionSpec {
    pub fn new(left_widths: Vec<usize>, right_widths: Vec<usize>) -> Self {
        Self {
            left_widths,
            right_widths,
        }
    }

    fn validate(&self, left_cols: usize, right_cols: usize) -> Result<()> {
        if self.left_widths.len() != self.right_widths.len() {
            return Err(LowRankError::PartitionMismatch(format!(
                "{} left blocks vs {} right blocks",
                self.left_widths.len(),
                self.right_widths.len()
            )));
        }
        if self.left_widths.iter().chain(&self.right_widths).any(|&w| w == 0) {
            return Err(LowRankError::PartitionMismatch("zero-width block".into()));
        }
        let (ls, rs): (usize, usize) = (self.left_widths.iter().sum(), self.right_widths.iter().sum());
        if ls != left_cols || rs != right_cols {
            return Err(LowRankError::PartitionMismatch(format!(
                "widths sum to ({ls}, {rs}) but operands have ({left_cols}, {right_cols}) columns"
            )));
        }
        Ok(())
    }
}

/// `[A_1 ⊗ B_1, ..., A_R ⊗ B_R]` over the column partition in `spec`.
pub fn partitionwise_khatri_rao(a: &DenseMatrix, b: &DenseMatrix, spec: &PartitionSpec) -> Result<DenseMatrix> {
    spec.validate(a.cols(), b.cols())?;
    let mut blocks = Vec::with_capacity(spec.left_widths.len());
    let (mut lo, mut ro) = (0, 0);
    for (&lw, &rw) in spec.left_widths.iter().zip(&spec.right_widths) {
        let ablk = a.submatrix(0, lo, a.rows(), lw);
        let bblk = b.submatrix(0, ro, b.rows(), rw);
        blocks.push(kronecker_product(&ablk, &bblk)?);
        lo += lw;
        ro += rw;
    }
    DenseMatrix::hstack(&blocks)
}

/// `Σ_{mask=1} (a − approx)²`, i.e. `‖M∘A − M∘approx‖_F²`.
pub fn masked_frobenius_loss(a: &DenseMatrix, approx: &DenseMatrix, mask: &MaskMatrix) -> Result<f64> {
    if a.shape() != approx.shape() {
        return Err(LowRankError::ShapeMismatch {
            op: "masked_frobenius_loss",
            left: a.shape(),
            right: approx.shape(),
        });
    }
    mask.check_shape("masked_frobenius_loss", a.shape())?;
    Ok(a.as_slice()
        .iter()
        .zip(approx.as_slice())
        .zip(mask.bits())
        .filter(|(_, &m)| m == 1)
        .map(|((x, y), _)| (x - y) * (x - y))
        .sum())
}
