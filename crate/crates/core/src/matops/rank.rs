//! Numerical rank and Kruskal rank.

use super::DenseMatrix;
use crate::error::{LowRankError, Result};

/// Default relative singular-value threshold.
pub const DEFAULT_REL_TOL: f64 = 1e-9;

/// Largest column count accepted by [`k_rank`].
pub const K_RANK_COLUMN_CAP: usize = 16;

pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    a.to_nalgebra().singular_values().iter().copied().collect()
}

/// Number of singular values strictly greater than `rel_tol * σ_max`.
/// A zero matrix has rank 0.
pub fn numerical_rank(a: &DenseMatrix, rel_tol: f64) -> usize {
    let sv = singular_values(a);
    let smax = sv.iter().fold(0.0_f64, |m, &s| m.max(s));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Kruskal rank: the largest `r` such that every set of `r` columns has
/// numerical rank `r`. Exhaustive over column subsets, capped at
/// [`K_RANK_COLUMN_CAP`] columns.
pub fn k_rank(a: &DenseMatrix, rel_tol: f64) -> Result<usize> {
    k_rank_capped(a, rel_tol, K_RANK_COLUMN_CAP)
}

pub fn k_rank_capped(a: &DenseMatrix, rel_tol: f64, cap: usize) -> Result<usize> {
    let n = a.cols();
    if n > cap {
        return Err(LowRankError::TooManyColumns { cols: n, cap });
    }
    // every subset of an independent set is independent, and the relative
    // threshold only gets easier on sub-blocks (σ_min grows, σ_max shrinks)
    if numerical_rank(a, rel_tol) == n {
        return Ok(n);
    }
    for r in 1..=n {
        let mut idx: Vec<usize> = (0..r).collect();
        loop {
            if numerical_rank(&a.select_cols(&idx), rel_tol) < r {
                return Ok(r - 1);
            }
            if !next_combination(&mut idx, n) {
                break;
            }
        }
    }
    Ok(n)
}

/// Advances `idx` to the next size-`idx.len()` subset of `0..n` in
/// lexicographic order. Returns `false` after the last subset.
pub fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let r = idx.len();
    let mut i = r;
    while i > 0 {
        i -= 1;
        if idx[i] < n - r + i {
            idx[i] += 1;
            for j in i + 1..r {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
