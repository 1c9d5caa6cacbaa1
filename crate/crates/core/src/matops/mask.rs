use rand::Rng;

use super::DenseMatrix;
use crate::error::{LowRankError, Result};

/// Binary indicator of observed entries, same shape as its companion matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskMatrix {
    rows: usize,
    cols: usize,
    bits: Vec<u8>,
}

impl MaskMatrix {
    pub fn new(rows: usize, cols: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(LowRankError::InvalidData {
                expected: rows * cols,
                got: bits.len(),
            });
        }
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(LowRankError::PreconditionViolation(format!(
                "mask entry at ({}, {}) is {}, expected 0 or 1",
                pos / cols.max(1),
                pos % cols.max(1),
                bits[pos]
            )));
        }
        Ok(Self { rows, cols, bits })
    }

    pub fn all_ones(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![1; rows * cols],
        }
    }

    pub fn all_zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                bits.push(u8::from(f(i, j)));
            }
        }
        Self { rows, cols, bits }
    }

    /// Each entry observed independently with probability `fraction`.
    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, fraction: f64, rng: &mut R) -> Self {
        Self::from_fn(rows, cols, |_, _| rng.gen::<f64>() < fraction)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j] == 1
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn count_observed(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn is_all_ones(&self) -> bool {
        self.bits.iter().all(|&b| b == 1)
    }

    /// Observed rows of column `n` (the index set `o_n`).
    pub fn observed_rows(&self, n: usize) -> Vec<usize> {
        (0..self.rows).filter(|&i| self.is_observed(i, n)).collect()
    }

    /// Observed columns of row `m` (the index set `p_m`).
    pub fn observed_cols(&self, m: usize) -> Vec<usize> {
        (0..self.cols).filter(|&j| self.is_observed(m, j)).collect()
    }

    pub fn complement(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            bits: self.bits.iter().map(|&b| 1 - b).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.is_observed(j, i))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_vec(self.rows, self.cols, self.bits.iter().map(|&b| f64::from(b)).collect())
    }

    pub(crate) fn check_shape(&self, op: &'static str, shape: (usize, usize)) -> Result<()> {
        if self.shape() != shape {
            return Err(LowRankError::ShapeMismatch {
                op,
                left: shape,
                right: self.shape(),
            });
        }
        Ok(())
    }
}
