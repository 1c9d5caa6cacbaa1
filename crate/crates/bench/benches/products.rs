use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lowrank_core::matops::{
    hadamard_product, k_rank, khatri_rao_product, kronecker_product, numerical_rank, DEFAULT_REL_TOL,
};
use lowrank_core::DenseMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn mat(r: usize, c: usize, seed: u64) -> DenseMatrix {
    DenseMatrix::random_uniform(r, c, -1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn products(c: &mut Criterion) {
    let mut g = c.benchmark_group("products");
    for n in [8, 16, 32] {
        let (a, b) = (mat(n, n, 1), mat(n, n, 2));
        g.bench_with_input(BenchmarkId::new("hadamard", n), &n, |bch, _| {
            bch.iter(|| hadamard_product(black_box(&a), &b))
        });
        g.bench_with_input(BenchmarkId::new("kronecker", n), &n, |bch, _| {
            bch.iter(|| kronecker_product(black_box(&a), &b))
        });
        g.bench_with_input(BenchmarkId::new("khatri_rao", n), &n, |bch, _| {
            bch.iter(|| khatri_rao_product(black_box(&a), &b))
        });
    }
    g.finish();
}

fn ranks(c: &mut Criterion) {
    let mut g = c.benchmark_group("ranks");
    for n in [16, 64] {
        let a = mat(n, n, 3);
        g.bench_with_input(BenchmarkId::new("numerical_rank", n), &n, |bch, _| {
            bch.iter(|| numerical_rank(black_box(&a), DEFAULT_REL_TOL))
        });
    }
    for cols in [8, 12] {
        let a = mat(cols, cols, 4);
        g.bench_with_input(BenchmarkId::new("k_rank", cols), &cols, |bch, _| {
            bch.iter(|| k_rank(black_box(&a), DEFAULT_REL_TOL))
        });
    }
    g.finish();
}

criterion_group!(benches, products, ranks);
criterion_main!(benches);
