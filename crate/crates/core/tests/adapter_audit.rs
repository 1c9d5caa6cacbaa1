mod common;

use common::{rand_mat, rng};
use lowrank_core::adapters::*;
use lowrank_core::matops::{hadamard_product, k_rank, DEFAULT_REL_TOL};
use lowrank_core::DenseMatrix;
use rand::Rng;

fn all_shapes() -> Vec<AdapterShape> {
    vec![
        AdapterShape::Lora { m: 16, n: 16, r: 4 },
        AdapterShape::Loha { m: 16, n: 16, r: 2 },
        AdapterShape::Lokr {
            m1: 4,
            m2: 4,
            n1: 2,
            n2: 8,
        },
        AdapterShape::LokrFactored {
            m1: 2,
            m2: 8,
            n1: 4,
            n2: 4,
            k: 2,
        },
        AdapterShape::lokh_for(16, 16, 2).unwrap(),
    ]
}

#[test]
fn parameter_counts_follow_closed_forms() {
    for (m, n, r) in [(16, 16, 4), (12, 20, 6), (7, 3, 2)] {
        assert_eq!(AdapterShape::Lora { m, n, r }.param_count(), (m + n) * r);
        // r̄ = r/2 keeps the LoRA budget
        let loha = AdapterShape::Loha { m, n, r: r / 2 };
        assert_eq!(loha.param_count(), AdapterShape::Lora { m, n, r }.param_count());
        assert_eq!(loha.rank_upper_bound(), (r * r / 4).min(m).min(n));
    }
}

#[test]
fn measured_rank_never_exceeds_bound_and_hits_it_generically() {
    for shape in all_shapes() {
        let mut hits = 0;
        for seed in 0..10 {
            let spec = AdapterSpec::random(shape, 1.0, false, &mut rng(seed)).unwrap();
            let rep = audit(&spec);
            let measured = rep.measured_rank.unwrap();
            assert!(measured <= rep.rank_upper_bound, "{shape:?} seed {seed}");
            hits += usize::from(measured == rep.rank_upper_bound);
        }
        if matches!(shape.kind(), AdapterKind::Lora | AdapterKind::Lokr) {
            assert!(hits >= 9, "{shape:?}: {hits}/10");
        }
    }
}

#[test]
fn lokh_k_rank_reaches_chain_bound() {
    let shape = AdapterShape::lokh_for(16, 16, 2).unwrap();
    let mut hits = 0;
    for seed in 0..10 {
        let spec = AdapterSpec::random(shape, 1.0, false, &mut rng(seed)).unwrap();
        let rep = audit(&spec);
        assert_eq!(rep.k_rank_lower_bound, Some(5));
        let delta = materialize_delta(&spec).unwrap();
        let k = k_rank(&delta, DEFAULT_REL_TOL).unwrap();
        assert_eq!(rep.measured_k_rank, Some(k));
        hits += usize::from(k >= 5);
    }
    assert!(hits >= 9, "{hits}/10");
}

#[test]
fn loha_delta_matches_independent_composition() {
    let mut g = rng(1);
    let (b1, a1, b2, a2) = (
        rand_mat(8, 2, &mut g),
        rand_mat(2, 8, &mut g),
        rand_mat(8, 2, &mut g),
        rand_mat(2, 8, &mut g),
    );
    let want = DenseMatrix::from_fn(8, 8, |i, j| {
        let p1: f64 = (0..2).map(|k| b1.get(i, k) * a1.get(k, j)).sum();
        let p2: f64 = (0..2).map(|k| b2.get(i, k) * a2.get(k, j)).sum();
        p1 * p2
    });
    let spec = AdapterSpec::new(
        DenseMatrix::zeros(8, 8),
        vec![0.0; 8],
        1.0,
        AdapterFactors::Loha {
            b1: b1.clone(),
            a1: a1.clone(),
            b2: b2.clone(),
            a2: a2.clone(),
        },
    )
    .unwrap();
    let got = materialize_delta(&spec).unwrap();
    assert!(got.max_abs_diff(&want) < 1e-14);
    assert_eq!(
        got,
        hadamard_product(&b1.matmul(&a1).unwrap(), &b2.matmul(&a2).unwrap()).unwrap()
    );
}

#[test]
fn forward_paths_agree_over_seeds() {
    for shape in all_shapes() {
        for seed in 0..20 {
            let mut g = rng(100 + seed);
            let (m, n) = shape.dims();
            let factors = shape.random_factors(false, &mut g).unwrap();
            let base = rand_mat(m, n, &mut g);
            let bias: Vec<f64> = (0..m).map(|_| g.gen_range(-1.0..1.0)).collect();
            let spec = AdapterSpec::new(base.clone(), bias.clone(), 0.5, factors).unwrap();
            let x: Vec<f64> = (0..n).map(|_| g.gen_range(-1.0..1.0)).collect();
            let fast = forward(&spec, &x).unwrap();
            let slow = forward_materialized(&spec, &x).unwrap();
            assert!(
                fast.iter().zip(&slow).all(|(a, b)| (a - b).abs() < 1e-12),
                "{shape:?} seed {seed}"
            );

            // α = 0 leaves the base layer
            let plain = AdapterSpec::new(base.clone(), bias.clone(), 0.0, spec.factors().clone()).unwrap();
            let want: Vec<f64> = base.matvec(&x).unwrap().iter().zip(&bias).map(|(w, b)| w + b).collect();
            assert_eq!(forward(&plain, &x).unwrap(), want);
        }
    }
}

#[test]
fn report_serializes_with_declared_keys() {
    let spec = AdapterSpec::random(AdapterShape::Lora { m: 16, n: 16, r: 4 }, 1.0, false, &mut rng(3)).unwrap();
    let json = serde_json::to_value(audit(&spec)).unwrap();
    assert_eq!(json["kind"], "lora");
    assert_eq!(json["trainableParams"], 128);
    assert_eq!(json["rankUpperBound"], 4);
    assert_eq!(json["measuredRank"], 4);
    assert!(json["kRankLowerBound"].is_null());
}

#[test]
fn materialization_cap_is_enforced() {
    let shape = AdapterShape::Lokr {
        m1: 4,
        m2: 4,
        n1: 4,
        n2: 4,
    };
    let spec = AdapterSpec::random(shape, 1.0, false, &mut rng(4)).unwrap();
    assert!(materialize_delta_capped(&spec, 255).is_err());
    assert!(materialize_delta_capped(&spec, 256).is_ok());
}
