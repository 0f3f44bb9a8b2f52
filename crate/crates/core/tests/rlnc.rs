use cmr_core::algebra::Field;
use cmr_core::bounds::{msmr_point, Rational};
use cmr_core::rlnc::{rlnc_init, rlnc_repair_round, rlnc_stress, RlncError, StressOptions};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn init_dimensions() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = rlnc_init(8, 4, 5, 2, &Field::gf65536(), &mut rng).unwrap();
    assert_eq!((s.alpha(), s.file_size()), (3, 12));
    assert!((0..8).all(|i| s.node(i).rows() == 3 && s.node(i).cols() == 12));
    let s = rlnc_init(4, 2, 2, 2, &Field::gf256(), &mut rng).unwrap();
    assert_eq!((s.alpha(), s.file_size()), (2, 4));
    assert!(s.data_collection_failures().is_empty());
}

#[test]
fn init_rejects_bad_params() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!(matches!(
        rlnc_init(4, 4, 4, 1, &Field::gf256(), &mut rng),
        Err(RlncError::InvalidParams(_))
    ));
    assert!(matches!(
        rlnc_init(6, 3, 2, 1, &Field::gf256(), &mut rng),
        Err(RlncError::InvalidParams(_))
    ));
}

#[test]
fn repair_round_accounting() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut s = rlnc_init(8, 4, 5, 2, &Field::gf65536(), &mut rng).unwrap();
    for r in 1..=5u64 {
        rlnc_repair_round(&mut s, &[0, 1], &[2, 3, 4, 5, 6], &mut rng).unwrap();
        assert_eq!(s.ledger(), r * 10);
        assert!(s.data_collection_failures().is_empty());
    }
    assert_eq!(s.round(), 5);
    assert!(matches!(
        rlnc_repair_round(&mut s, &[0, 1], &[1, 3, 4, 5, 6], &mut rng),
        Err(RlncError::NotDisjoint(1))
    ));
    assert!(matches!(
        rlnc_repair_round(&mut s, &[0], &[2, 3, 4, 5, 6], &mut rng),
        Err(RlncError::SetSize(_))
    ));
    assert_eq!(s.ledger(), 50);
}

#[test]
fn bandwidth_matches_msmr_point() {
    let (_, gamma) = msmr_point(12, 4, 5, 2).unwrap();
    assert_eq!(gamma, Rational::from_integer(10));
}

#[test]
fn stress_gf65536() {
    let rep = rlnc_stress(
        8,
        4,
        5,
        2,
        &Field::gf65536(),
        100,
        7,
        StressOptions::default(),
    )
    .unwrap();
    assert!(rep.failures.is_empty(), "{:?}", rep.failures);
    assert_eq!(rep.ledger, 100 * 5 * 2);
    assert_eq!(rep.bound_ratio_exact, Rational::from_integer(1));
    assert_eq!(rep.bound_ratio, 1.0);
    assert_eq!(rep.checked_rounds, 100);
    assert!(rep.passed());
}

#[test]
fn stress_zero_rounds() {
    let rep = rlnc_stress(8, 4, 5, 2, &Field::gf256(), 0, 1, StressOptions::default()).unwrap();
    assert!(rep.passed());
    assert_eq!(rep.ledger, 0);
}

#[test]
fn stress_over_gf2_fails() {
    let gf2 = Field::prime(2).unwrap();
    let rep = rlnc_stress(8, 4, 5, 2, &gf2, 10, 3, StressOptions::default()).unwrap();
    assert!(!rep.failures.is_empty());
    assert!(!rep.passed());
}

#[test]
fn stress_is_deterministic_and_serializes() {
    let opts = StressOptions { check_every: 10 };
    let a = rlnc_stress(6, 3, 4, 2, &Field::gf256(), 30, 11, opts).unwrap();
    let b = rlnc_stress(6, 3, 4, 2, &Field::gf256(), 30, 11, opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.checked_rounds, 3);
    let json = serde_json::to_value(&a).unwrap();
    for key in [
        "params",
        "rounds",
        "failures",
        "bandwidth_per_round",
        "bound_ratio",
    ] {
        assert!(json.get(key).is_some(), "{key}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ratio_is_one_everywhere(k in 1usize..5, dk in 0usize..3, t in 1usize..4, slack in 0usize..2, seed in any::<u64>()) {
        let d = k + dk;
        let n = d + t + slack;
        let rep = rlnc_stress(n, k, d, t, &Field::gf65536(), 3, seed, StressOptions::default()).unwrap();
        prop_assert_eq!(rep.bound_ratio_exact, Rational::from_integer(1));
        prop_assert_eq!(rep.ledger, (3 * d * t) as u64);
    }
}
