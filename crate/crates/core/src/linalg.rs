//! Small symmetric positive-definite solves for normal equations.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{LowRankError, Result};
use crate::matops::DenseMatrix;

/// Pivot ratio below which an unregularized Gram matrix counts as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-7;

/// Cholesky factor of a Gram matrix `G + λI`.
pub(crate) struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    /// Factors `gram + shift * I`. With `shift == 0` a pivot ratio test
    /// rejects numerically singular systems.
    pub fn new(gram: &DenseMatrix, shift: f64) -> Result<Self> {
        let k = gram.rows();
        let mut g = gram.to_nalgebra();
        for i in 0..k {
            g[(i, i)] += shift;
        }
        let chol = Cholesky::new(g).ok_or(LowRankError::SingularNormalEquations)?;
        if shift == 0.0 && k > 0 {
            let l = chol.l_dirty();
            let (lo, hi) = (0..k).fold((f64::INFINITY, 0.0_f64), |(lo, hi), i| {
                let d = l[(i, i)].abs();
                (lo.min(d), hi.max(d))
            });
            // written so that NaN pivots also count as singular
            let healthy = lo > SINGULAR_PIVOT_RATIO * hi;
            if !healthy {
                return Err(LowRankError::SingularNormalEquations);
            }
        }
        Ok(Self { chol })
    }

    /// Solves for every column of `rhs`.
    pub fn solve(&self, rhs: &DenseMatrix) -> DenseMatrix {
        let x: DMatrix<f64> = self.chol.solve(&rhs.to_nalgebra());
        DenseMatrix::from_nalgebra(&x)
    }

    pub fn solve_vec(&self, rhs: &[f64]) -> Vec<f64> {
        let b = DMatrix::from_column_slice(rhs.len(), 1, rhs);
        self.chol.solve(&b).iter().copied().collect()
    }
}

/// `XᵀX` for row-major `X` (sum over rows, fixed order).
pub(crate) fn gram_of_rows(x: &DenseMatrix) -> DenseMatrix {
    let k = x.cols();
    let mut g = DenseMatrix::zeros(k, k);
    for i in 0..x.rows() {
        let r = x.row(i);
        for a in 0..k {
            let ra = r[a];
            for b in 0..k {
                g[(a, b)] += ra * r[b];
            }
        }
    }
    g
}
