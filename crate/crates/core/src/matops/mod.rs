//! Dense matrix container, special products, masked loss and rank utilities.

mod dense;
mod mask;
mod products;
mod rank;

pub(crate) use dense::dot;
pub use dense::DenseMatrix;
pub use mask::MaskMatrix;
pub use products::{
    hadamard_product, khatri_rao_chain, khatri_rao_product, kron_vec, kronecker_product, kronecker_product_capped,
    masked_frobenius_loss, partitionwise_khatri_rao, PartitionSpec, DEFAULT_SIZE_CAP,
};
pub use rank::{
    k_rank, k_rank_capped, next_combination, numerical_rank, singular_values, DEFAULT_REL_TOL, K_RANK_COLUMN_CAP,
};
