//! Structured low-rank matrix decompositions.
//!
//! - [`als`]: alternating least squares for `A ≈ WZ`, plain, regularized and masked.
//! - [`hadamard`]: `A ≈ (C1 D1) ∘ (C2 D2)` by alternating gradient descent.
//! - [`kronecker`]: `A ≈ B ⊗ C` by closed-form alternating updates.
//! - [`khatri_rao`]: `A ≈ B ⊙ C` and longer Khatri-Rao cascades.
//! - [`adapters`]: LoRA / LoHA / LoKr / LoKH weight deltas, forward passes and audits.
//! - [`matops`]: the dense matrix type, special products and rank utilities.

pub mod adapters;
pub mod als;
pub mod error;
pub mod fit;
pub mod hadamard;
pub mod khatri_rao;
pub mod kronecker;
mod linalg;
pub mod matops;
mod parallel;

pub use adapters::{AdapterKind, AdapterReport, AdapterShape, AdapterSpec};
pub use als::AlsFactors;
pub use error::{LowRankError, Result};
pub use fit::{ConvergenceTrace, FitConfig, StopReason, TraceRecord};
pub use hadamard::HadamardFactors;
pub use khatri_rao::KrFactors;
pub use kronecker::{BlockingScheme, KronFactors};
pub use matops::{DenseMatrix, MaskMatrix, PartitionSpec};
