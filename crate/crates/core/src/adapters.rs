//! LoRA-family weight deltas: construction, materialization, forward passes
//! and parameter/rank accounting.
//!
//! | kind            | `ΔW`                  | trainable parameters |
//! |-----------------|-----------------------|----------------------|
//! | `Lora`          | `B A`                 | `(m + n) r`          |
//! | `Loha`          | `(B1 A1) ∘ (B2 A2)`   | `2 (m + n) r̄`        |
//! | `Lokr`          | `A ⊗ B`               | `m1 n1 + m2 n2`      |
//! | `LokrFactored`  | `A ⊗ (C D)`           | `m1 n1 + k (m2 + n2)`|
//! | `Lokh`          | `F_1 ⊙ … ⊙ F_q`       | `q r̄ n`              |
//!
//! The forward pass is `o = W x + b + α ΔW x`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LowRankError, Result};
use crate::matops::{
    dot, hadamard_product, k_rank, khatri_rao_chain, kron_vec, kronecker_product_capped, numerical_rank, DenseMatrix,
    DEFAULT_REL_TOL, DEFAULT_SIZE_CAP, K_RANK_COLUMN_CAP,
};

/// Largest `m·n` for which [`audit`] measures the numerical rank of `ΔW`.
pub const DESK_SCALE_ENTRIES: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdapterKind {
    Lora,
    Loha,
    Lokr,
    LokrFactored,
    Lokh,
}

impl AdapterKind {
    pub const ALL: [AdapterKind; 5] = [Self::Lora, Self::Loha, Self::Lokr, Self::LokrFactored, Self::Lokh];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Lora => "lora",
            Self::Loha => "loha",
            Self::Lokr => "lokr",
            Self::LokrFactored => "lokr-factored",
            Self::Lokh => "lokh",
        }
    }
}

impl fmt::Display for AdapterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AdapterKind {
    type Err = LowRankError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| LowRankError::ShapeAlgebraError(format!("unknown adapter kind '{s}'")))
    }
}

/// Factor dimensions of an adapter, independent of the factor values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdapterShape {
    Lora {
        m: usize,
        n: usize,
        r: usize,
    },
    /// `r` is the per-product rank `r̄`.
    Loha {
        m: usize,
        n: usize,
        r: usize,
    },
    Lokr {
        m1: usize,
        m2: usize,
        n1: usize,
        n2: usize,
    },
    LokrFactored {
        m1: usize,
        m2: usize,
        n1: usize,
        n2: usize,
        k: usize,
    },
    /// `q` factors of shape `rbar x n`, so `m = rbar^q`.
    Lokh {
        rbar: usize,
        q: usize,
        n: usize,
    },
}

impl AdapterShape {
    pub fn kind(&self) -> AdapterKind {
        match self {
            Self::Lora { .. } => AdapterKind::Lora,
            Self::Loha { .. } => AdapterKind::Loha,
            Self::Lokr { .. } => AdapterKind::Lokr,
            Self::LokrFactored { .. } => AdapterKind::LokrFactored,
            Self::Lokh { .. } => AdapterKind::Lokh,
        }
    }

    /// Shape of `ΔW`.
    pub fn dims(&self) -> (usize, usize) {
        match *self {
            Self::Lora { m, n, .. } | Self::Loha { m, n, .. } => (m, n),
            Self::Lokr { m1, m2, n1, n2 } | Self::LokrFactored { m1, m2, n1, n2, .. } => (m1 * m2, n1 * n2),
            Self::Lokh { rbar, q, n } => (rbar.pow(q as u32), n),
        }
    }

    /// Closed-form trainable parameter count.
    pub fn param_count(&self) -> usize {
        match *self {
            Self::Lora { m, n, r } => (m + n) * r,
            Self::Loha { m, n, r } => 2 * (m + n) * r,
            Self::Lokr { m1, m2, n1, n2 } => m1 * n1 + m2 * n2,
            Self::LokrFactored { m1, m2, n1, n2, k } => m1 * n1 + k * (m2 + n2),
            Self::Lokh { rbar, q, n } => q * rbar * n,
        }
    }

    /// Upper bound on `rank(ΔW)` from the product rank theorems, capped at `min(m, n)`.
    pub fn rank_upper_bound(&self) -> usize {
        let (m, n) = self.dims();
        let bound = match *self {
            Self::Lora { r, .. } => r,
            Self::Loha { r, .. } => r * r,
            Self::Lokr { m1, m2, n1, n2 } => m1.min(n1) * m2.min(n2),
            Self::LokrFactored { m1, m2, n1, n2, k } => m1.min(n1) * m2.min(n2).min(k),
            Self::Lokh { .. } => m.min(n),
        };
        bound.min(m).min(n)
    }

    fn validate(&self) -> Result<()> {
        let positive = match *self {
            Self::Lora { m, n, r } | Self::Loha { m, n, r } => [m, n, r, 1, 1],
            Self::Lokr { m1, m2, n1, n2 } => [m1, m2, n1, n2, 1],
            Self::LokrFactored { m1, m2, n1, n2, k } => [m1, m2, n1, n2, k],
            Self::Lokh { rbar, q, n } => [rbar, q.saturating_sub(1), n, 1, 1],
        };
        if positive.contains(&0) {
            return Err(LowRankError::ShapeAlgebraError(format!(
                "degenerate adapter shape {self:?}"
            )));
        }
        if let Self::Lokh { rbar, q, .. } = *self {
            if u32::try_from(q).ok().and_then(|q| rbar.checked_pow(q)).is_none() {
                return Err(LowRankError::ShapeAlgebraError(format!(
                    "rbar^q overflows for rbar={rbar}, q={q}"
                )));
            }
        }
        Ok(())
    }

    /// Shape for a LoKH adapter on an `m x n` weight: `rbar` must be an
    /// exact `q`-th root of `m`.
    pub fn lokh_for(m: usize, n: usize, rbar: usize) -> Result<Self> {
        if rbar < 2 {
            return Err(LowRankError::ShapeAlgebraError(format!(
                "LoKH needs rbar >= 2, got {rbar}"
            )));
        }
        let (mut q, mut p) = (0u32, 1usize);
        while p < m {
            p = p
                .checked_mul(rbar)
                .ok_or_else(|| LowRankError::ShapeAlgebraError("rbar^q overflows".into()))?;
            q += 1;
        }
        if p != m || q < 2 {
            return Err(LowRankError::ShapeAlgebraError(format!(
                "LoKH needs m = rbar^q with q >= 2; m={m} is not such a power of {rbar}"
            )));
        }
        Ok(Self::Lokh { rbar, q: q as usize, n })
    }

    /// Uniform `[-1, 1]` factors. With `zero_init` the leftmost factor is zero, so `ΔW = 0`.
    pub fn random_factors<R: Rng + ?Sized>(&self, zero_init: bool, rng: &mut R) -> Result<AdapterFactors> {
        self.validate()?;
        let mut draw = |r, c| DenseMatrix::random_uniform(r, c, -1.0, 1.0, rng);
        let zero_or = |x: DenseMatrix| {
            if zero_init {
                DenseMatrix::zeros(x.rows(), x.cols())
            } else {
                x
            }
        };
        Ok(match *self {
            Self::Lora { m, n, r } => {
                let b = zero_or(draw(m, r));
                AdapterFactors::Lora { b, a: draw(r, n) }
            }
            Self::Loha { m, n, r } => {
                let b1 = zero_or(draw(m, r));
                AdapterFactors::Loha {
                    b1,
                    a1: draw(r, n),
                    b2: draw(m, r),
                    a2: draw(r, n),
                }
            }
            Self::Lokr { m1, m2, n1, n2 } => {
                let a = zero_or(draw(m1, n1));
                AdapterFactors::Lokr { a, b: draw(m2, n2) }
            }
            Self::LokrFactored { m1, m2, n1, n2, k } => {
                let a = zero_or(draw(m1, n1));
                AdapterFactors::LokrFactored {
                    a,
                    c: draw(m2, k),
                    d: draw(k, n2),
                }
            }
            Self::Lokh { rbar, q, n } => {
                let mut factors: Vec<DenseMatrix> = (0..q).map(|_| draw(rbar, n)).collect();
                factors[0] = zero_or(factors[0].clone());
                AdapterFactors::Lokh { factors }
            }
        })
    }
}

/// Factor matrices of an adapter.
#[derive(Debug, Clone, PartialEq)]
pub enum AdapterFactors {
    Lora {
        b: DenseMatrix,
        a: DenseMatrix,
    },
    Loha {
        b1: DenseMatrix,
        a1: DenseMatrix,
        b2: DenseMatrix,
        a2: DenseMatrix,
    },
    Lokr {
        a: DenseMatrix,
        b: DenseMatrix,
    },
    LokrFactored {
        a: DenseMatrix,
        c: DenseMatrix,
        d: DenseMatrix,
    },
    Lokh {
        factors: Vec<DenseMatrix>,
    },
}

fn shape_err(msg: String) -> LowRankError {
    LowRankError::ShapeAlgebraError(msg)
}

impl AdapterFactors {
    pub fn kind(&self) -> AdapterKind {
        match self {
            Self::Lora { .. } => AdapterKind::Lora,
            Self::Loha { .. } => AdapterKind::Loha,
            Self::Lokr { .. } => AdapterKind::Lokr,
            Self::LokrFactored { .. } => AdapterKind::LokrFactored,
            Self::Lokh { .. } => AdapterKind::Lokh,
        }
    }

    pub fn matrices(&self) -> Vec<&DenseMatrix> {
        match self {
            Self::Lora { b, a } => vec![b, a],
            Self::Loha { b1, a1, b2, a2 } => vec![b1, a1, b2, a2],
            Self::Lokr { a, b } => vec![a, b],
            Self::LokrFactored { a, c, d } => vec![a, c, d],
            Self::Lokh { factors } => factors.iter().collect(),
        }
    }

    /// Infers the shape from the factor matrices, checking that the algebra closes.
    pub fn shape(&self) -> Result<AdapterShape> {
        let shape = match self {
            Self::Lora { b, a } => {
                if b.cols() != a.rows() {
                    return Err(shape_err(format!(
                        "LoRA: B is {:?} but A is {:?}",
                        b.shape(),
                        a.shape()
                    )));
                }
                AdapterShape::Lora {
                    m: b.rows(),
                    n: a.cols(),
                    r: a.rows(),
                }
            }
            Self::Loha { b1, a1, b2, a2 } => {
                let (m, r) = b1.shape();
                let n = a1.cols();
                if b2.shape() != (m, r) || a1.shape() != (r, n) || a2.shape() != (r, n) {
                    return Err(shape_err(format!(
                        "LoHA: inconsistent shapes B1 {:?}, A1 {:?}, B2 {:?}, A2 {:?}",
                        b1.shape(),
                        a1.shape(),
                        b2.shape(),
                        a2.shape()
                    )));
                }
                AdapterShape::Loha { m, n, r }
            }
            Self::Lokr { a, b } => AdapterShape::Lokr {
                m1: a.rows(),
                m2: b.rows(),
                n1: a.cols(),
                n2: b.cols(),
            },
            Self::LokrFactored { a, c, d } => {
                if c.cols() != d.rows() {
                    return Err(shape_err(format!(
                        "LoKr: C is {:?} but D is {:?}",
                        c.shape(),
                        d.shape()
                    )));
                }
                AdapterShape::LokrFactored {
                    m1: a.rows(),
                    m2: c.rows(),
                    n1: a.cols(),
                    n2: d.cols(),
                    k: c.cols(),
                }
            }
            Self::Lokh { factors } => {
                let first = factors.first().ok_or_else(|| shape_err("LoKH: no factors".into()))?;
                if let Some(bad) = factors.iter().find(|f| f.shape() != first.shape()) {
                    return Err(shape_err(format!(
                        "LoKH: factors must share a shape, got {:?} and {:?}",
                        first.shape(),
                        bad.shape()
                    )));
                }
                if factors.len() < 2 {
                    return Err(shape_err("LoKH: needs at least 2 factors".into()));
                }
                AdapterShape::Lokh {
                    rbar: first.rows(),
                    q: factors.len(),
                    n: first.cols(),
                }
            }
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn param_count(&self) -> usize {
        self.matrices().iter().map(|x| x.len()).sum()
    }
}

/// A frozen base layer `(W, b)` with a scaled adapter delta.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterSpec {
    base: DenseMatrix,
    bias: Vec<f64>,
    alpha: f64,
    factors: AdapterFactors,
    shape: AdapterShape,
}

impl AdapterSpec {
    pub fn new(base: DenseMatrix, bias: Vec<f64>, alpha: f64, factors: AdapterFactors) -> Result<Self> {
        let shape = factors.shape()?;
        if shape.dims() != base.shape() {
            return Err(shape_err(format!(
                "{} delta is {:?} but W is {:?}",
                shape.kind(),
                shape.dims(),
                base.shape()
            )));
        }
        if bias.len() != base.rows() {
            return Err(shape_err(format!(
                "bias has length {}, W has {} rows",
                bias.len(),
                base.rows()
            )));
        }
        Ok(Self {
            base,
            bias,
            alpha,
            factors,
            shape,
        })
    }

    /// Zero base weights and bias around random factors.
    pub fn random<R: Rng + ?Sized>(shape: AdapterShape, alpha: f64, zero_init: bool, rng: &mut R) -> Result<Self> {
        let factors = shape.random_factors(zero_init, rng)?;
        let (m, n) = shape.dims();
        Self::new(DenseMatrix::zeros(m, n), vec![0.0; m], alpha, factors)
    }

    pub fn kind(&self) -> AdapterKind {
        self.shape.kind()
    }

    pub fn shape(&self) -> AdapterShape {
        self.shape
    }

    pub fn base(&self) -> &DenseMatrix {
        &self.base
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn factors(&self) -> &AdapterFactors {
        &self.factors
    }
}

pub fn materialize_delta(spec: &AdapterSpec) -> Result<DenseMatrix> {
    materialize_delta_capped(spec, DEFAULT_SIZE_CAP)
}

/// `ΔW` as a dense matrix; Kronecker materializations respect `cap`.
pub fn materialize_delta_capped(spec: &AdapterSpec, cap: usize) -> Result<DenseMatrix> {
    match &spec.factors {
        AdapterFactors::Lora { b, a } => b.matmul(a),
        AdapterFactors::Loha { b1, a1, b2, a2 } => hadamard_product(&b1.matmul(a1)?, &b2.matmul(a2)?),
        AdapterFactors::Lokr { a, b } => kronecker_product_capped(a, b, cap),
        AdapterFactors::LokrFactored { a, c, d } => kronecker_product_capped(a, &c.matmul(d)?, cap),
        AdapterFactors::Lokh { factors } => khatri_rao_chain(factors),
    }
}

/// `W x + b + α ΔW x`, applying `ΔW` through its factors without materializing it.
pub fn forward(spec: &AdapterSpec, x: &[f64]) -> Result<Vec<f64>> {
    let delta = delta_apply(&spec.factors, x, spec.base.cols())?;
    combine(spec, x, &delta)
}

/// [`forward`] through the materialized `ΔW`.
pub fn forward_materialized(spec: &AdapterSpec, x: &[f64]) -> Result<Vec<f64>> {
    let delta = materialize_delta(spec)?.matvec(x)?;
    combine(spec, x, &delta)
}

fn combine(spec: &AdapterSpec, x: &[f64], delta: &[f64]) -> Result<Vec<f64>> {
    let wx = spec.base.matvec(x)?;
    Ok(wx
        .iter()
        .zip(&spec.bias)
        .zip(delta)
        .map(|((w, b), d)| w + b + spec.alpha * d)
        .collect())
}

fn delta_apply(f: &AdapterFactors, x: &[f64], n: usize) -> Result<Vec<f64>> {
    if x.len() != n {
        return Err(LowRankError::ShapeMismatch {
            op: "adapter forward",
            left: (n, 1),
            right: (x.len(), 1),
        });
    }
    match f {
        AdapterFactors::Lora { b, a } => b.matvec(&a.matvec(x)?),
        AdapterFactors::Loha { b1, a1, b2, a2 } => {
            // out_i = Σ_{k,l} b1_ik b2_il T_kl with T = A1 diag(x) A2ᵀ
            let r = a1.rows();
            let t = DenseMatrix::from_fn(r, r, |k, l| {
                (0..n).map(|j| a1.get(k, j) * x[j] * a2.get(l, j)).sum::<f64>()
            });
            Ok((0..b1.rows())
                .map(|i| {
                    let u = t.matvec(b2.row(i)).expect("r x r times r");
                    dot(b1.row(i), &u)
                })
                .collect())
        }
        AdapterFactors::Lokr { a, b } => kron_apply(a, b, x),
        AdapterFactors::LokrFactored { a, c, d } => kron_apply(a, &c.matmul(d)?, x),
        AdapterFactors::Lokh { factors } => {
            let mut out = vec![0.0; factors.iter().map(|f| f.rows()).product()];
            for (j, &xj) in x.iter().enumerate() {
                if xj == 0.0 {
                    continue;
                }
                let col = factors[1..]
                    .iter()
                    .fold(factors[0].col(j), |acc, f| kron_vec(&acc, &f.col(j)));
                for (o, v) in out.iter_mut().zip(col) {
                    *o += xj * v;
                }
            }
            Ok(out)
        }
    }
}

/// `(A ⊗ B) x` as `vec(A X Bᵀ)` with `X` the `n1 x n2` row-major reshape of `x`.
fn kron_apply(a: &DenseMatrix, b: &DenseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    let (n1, n2) = (a.cols(), b.cols());
    let xm = DenseMatrix::new(n1, n2, x.to_vec())?;
    Ok(a.matmul(&xm)?.matmul(&b.transpose())?.into_vec())
}

/// Parameter and rank accounting for one adapter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AdapterReport {
    pub kind: AdapterKind,
    pub rows: usize,
    pub cols: usize,
    pub trainable_params: usize,
    pub rank_upper_bound: usize,
    /// LoKH only: the largest factor rank.
    pub rank_lower_bound: Option<usize>,
    /// LoKH only: `min(Σ k_rank(F_t) − (q − 1), n)` from the measured factor k-ranks.
    pub k_rank_lower_bound: Option<usize>,
    pub measured_rank: Option<usize>,
    pub measured_k_rank: Option<usize>,
}

/// Counts and bounds are exact; measured values are filled in only at desk
/// scale (`m·n ≤ DESK_SCALE_ENTRIES`, k-ranks for at most 16 columns).
pub fn audit(spec: &AdapterSpec) -> AdapterReport {
    audit_capped(spec, DEFAULT_SIZE_CAP)
}

/// [`audit`] with an explicit materialization cap; measured values are
/// omitted when `ΔW` would exceed it.
pub fn audit_capped(spec: &AdapterSpec, cap: usize) -> AdapterReport {
    let shape = spec.shape;
    let (m, n) = shape.dims();
    let desk = m.saturating_mul(n) <= DESK_SCALE_ENTRIES;
    let small = n <= K_RANK_COLUMN_CAP;
    let delta = desk.then(|| materialize_delta_capped(spec, cap).ok()).flatten();

    let (rank_lower_bound, k_rank_lower_bound) = match &spec.factors {
        AdapterFactors::Lokh { factors } => {
            let lower = factors.iter().map(|f| numerical_rank(f, DEFAULT_REL_TOL)).max();
            let k_lower = if small {
                let ks: Option<Vec<usize>> = factors.iter().map(|f| k_rank(f, DEFAULT_REL_TOL).ok()).collect();
                ks.map(|ks| chain_k_rank_bound(&ks, n))
            } else {
                None
            };
            (lower, k_lower)
        }
        _ => (None, None),
    };

    AdapterReport {
        kind: shape.kind(),
        rows: m,
        cols: n,
        trainable_params: spec.factors.param_count(),
        rank_upper_bound: shape.rank_upper_bound(),
        rank_lower_bound,
        k_rank_lower_bound,
        measured_rank: delta.as_ref().map(|d| numerical_rank(d, DEFAULT_REL_TOL)),
        measured_k_rank: delta
            .as_ref()
            .filter(|_| small)
            .and_then(|d| k_rank(d, DEFAULT_REL_TOL).ok()),
    }
}

/// Iterates `k(A ⊙ B) ≥ min(k_A + k_B − 1, n)` along a chain; a factor with
/// k-rank 0 gives no guarantee.
pub fn chain_k_rank_bound(k_ranks: &[usize], n: usize) -> usize {
    let mut iter = k_ranks.iter().copied();
    let Some(first) = iter.next() else { return 0 };
    iter.fold(
        first.min(n),
        |acc, k| if acc == 0 || k == 0 { 0 } else { (acc + k - 1).min(n) },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shapes() -> Vec<AdapterShape> {
        vec![
            AdapterShape::Lora { m: 6, n: 5, r: 2 },
            AdapterShape::Loha { m: 6, n: 5, r: 2 },
            AdapterShape::Lokr {
                m1: 2,
                m2: 3,
                n1: 5,
                n2: 1,
            },
            AdapterShape::LokrFactored {
                m1: 2,
                m2: 4,
                n1: 2,
                n2: 3,
                k: 2,
            },
            AdapterShape::Lokh { rbar: 2, q: 3, n: 5 },
        ]
    }

    #[test]
    fn param_counts_match_factor_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for s in shapes() {
            let f = s.random_factors(false, &mut rng).unwrap();
            assert_eq!(f.param_count(), s.param_count(), "{s:?}");
            assert_eq!(f.shape().unwrap(), s);
        }
    }

    #[test]
    fn published_instances() {
        let lora = AdapterShape::Lora { m: 16, n: 16, r: 4 };
        assert_eq!((lora.param_count(), lora.rank_upper_bound()), (128, 4));
        let loha = AdapterShape::Loha { m: 16, n: 16, r: 2 };
        assert_eq!((loha.param_count(), loha.rank_upper_bound()), (128, 4));
        assert_eq!(chain_k_rank_bound(&[2, 2, 2, 2], 16), 5);
        assert_eq!(
            AdapterShape::lokh_for(16, 16, 2).unwrap(),
            AdapterShape::Lokh { rbar: 2, q: 4, n: 16 }
        );
        assert!(AdapterShape::lokh_for(12, 16, 2).is_err());
        assert!(AdapterShape::lokh_for(2, 16, 2).is_err());
    }

    #[test]
    fn zero_init_gives_zero_delta_and_base_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for s in shapes() {
            let (m, n) = s.dims();
            let factors = s.random_factors(true, &mut rng).unwrap();
            let base = DenseMatrix::random_uniform(m, n, -1.0, 1.0, &mut rng);
            let bias: Vec<f64> = (0..m).map(|i| i as f64).collect();
            let spec = AdapterSpec::new(base.clone(), bias.clone(), 0.7, factors).unwrap();
            assert_eq!(materialize_delta(&spec).unwrap().max_abs(), 0.0);
            let x: Vec<f64> = (0..n).map(|j| 1.0 - j as f64 * 0.3).collect();
            let want: Vec<f64> = base.matvec(&x).unwrap().iter().zip(&bias).map(|(w, b)| w + b).collect();
            assert_eq!(forward(&spec, &x).unwrap(), want);
        }
    }

    #[test]
    fn lokr_with_unit_left_factor_is_right_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = DenseMatrix::random_uniform(3, 4, -1.0, 1.0, &mut rng);
        let spec = AdapterSpec::new(
            DenseMatrix::zeros(3, 4),
            vec![0.0; 3],
            1.0,
            AdapterFactors::Lokr {
                a: DenseMatrix::ones(1, 1),
                b: b.clone(),
            },
        )
        .unwrap();
        assert_eq!(materialize_delta(&spec).unwrap(), b);
    }

    #[test]
    fn forward_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for s in shapes() {
            let spec = AdapterSpec::random(s, 1.3, false, &mut rng).unwrap();
            let x: Vec<f64> = (0..s.dims().1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fast = forward(&spec, &x).unwrap();
            let slow = forward_materialized(&spec, &x).unwrap();
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12, "{s:?}");
            }
            assert!(matches!(
                forward(&spec, &[1.0]),
                Err(LowRankError::ShapeMismatch { .. })
            ));
        }
    }

    #[test]
    fn shape_algebra_errors() {
        let bad = AdapterFactors::Lora {
            b: DenseMatrix::zeros(4, 2),
            a: DenseMatrix::zeros(3, 4),
        };
        assert!(matches!(bad.shape(), Err(LowRankError::ShapeAlgebraError(_))));
        let ok = AdapterFactors::Lora {
            b: DenseMatrix::zeros(4, 2),
            a: DenseMatrix::zeros(2, 4),
        };
        assert!(matches!(
            AdapterSpec::new(DenseMatrix::zeros(4, 5), vec![0.0; 4], 1.0, ok),
            Err(LowRankError::ShapeAlgebraError(_))
        ));
        let mixed = AdapterFactors::Lokh {
            factors: vec![DenseMatrix::zeros(2, 3), DenseMatrix::zeros(3, 3)],
        };
        assert!(mixed.shape().is_err());
    }

    #[test]
    fn kind_parsing() {
        for k in AdapterKind::ALL {
            assert_eq!(k.to_string().parse::<AdapterKind>().unwrap(), k);
        }
        assert!("lorax".parse::<AdapterKind>().is_err());
    }

    #[test]
    fn audit_report_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for s in shapes() {
            let spec = AdapterSpec::random(s, 1.0, false, &mut rng).unwrap();
            let rep = audit(&spec);
            assert_eq!(rep.trainable_params, s.param_count());
            assert!(rep.measured_rank.unwrap() <= rep.rank_upper_bound);
            assert_eq!(rep.k_rank_lower_bound.is_some(), s.kind() == AdapterKind::Lokh);
        }
    }
}
