use std::collections::HashMap;

use proptest::prelude::*;
use steplsm_bench::{generate, key_for, Distribution, Op, WorkloadSpec};

#[test]
fn single_key_space_yields_one_key() {
    let spec = WorkloadSpec {
        key_space_size: 1,
        op_count: 1000,
        distribution: Distribution::zipfian(),
        ..WorkloadSpec::default()
    };
    for op in generate(&spec).unwrap() {
        match op {
            Op::Put { key, .. } => assert_eq!(key, key_for(0, 16)),
            other => panic!("unexpected {other:?}"),
        }
    }
}

#[test]
fn zipf_head_frequency() {
    let n = 10_000u64;
    let theta = 0.99;
    let spec = WorkloadSpec {
        key_space_size: n,
        distribution: Distribution::Zipfian { theta },
        seed: 5,
        ..WorkloadSpec::default()
    };
    let mut stream = generate(&spec).unwrap();
    let draws = 1_000_000;
    let mut counts: HashMap<u64, u64> = HashMap::new();
    for _ in 0..draws {
        *counts.entry(stream.sample_id()).or_default() += 1;
    }
    let harmonic: f64 = (1..=n).map(|k| (k as f64).powf(-theta)).sum();
    let expected = 1.0 / harmonic;
    let observed = counts[&0] as f64 / draws as f64;
    assert!(
        (observed - expected).abs() <= 0.1 * expected,
        "top key frequency {observed}, expected {expected}"
    );
    // Rank 2 is roughly half as frequent as rank 1.
    let second = counts[&1] as f64 / draws as f64;
    let want = expected * 2f64.powf(-theta);
    assert!((second - want).abs() <= 0.1 * want);
}

#[test]
fn fractions_are_validated() {
    let spec = WorkloadSpec {
        read_fraction: 0.7,
        delete_fraction: 0.4,
        ..WorkloadSpec::default()
    };
    assert!(generate(&spec).is_err());
    let spec = WorkloadSpec {
        key_space_size: 0,
        ..WorkloadSpec::default()
    };
    assert!(generate(&spec).is_err());
}

#[test]
fn op_mix_follows_fractions() {
    let spec = WorkloadSpec {
        op_count: 200_000,
        read_fraction: 0.3,
        delete_fraction: 0.1,
        scan_fraction: 0.05,
        ..WorkloadSpec::default()
    };
    let (mut gets, mut deletes, mut scans) = (0, 0, 0);
    for op in generate(&spec).unwrap() {
        match op {
            Op::Get { .. } => gets += 1,
            Op::Delete { .. } => deletes += 1,
            Op::Scan { .. } => scans += 1,
            Op::Put { value, .. } => assert_eq!(value.len(), 100),
        }
    }
    let frac = |c: i32| c as f64 / 200_000.0;
    assert!((frac(gets) - 0.3).abs() < 0.01);
    assert!((frac(deletes) - 0.1).abs() < 0.01);
    assert!((frac(scans) - 0.05).abs() < 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn same_spec_same_stream(seed in any::<u64>(), zipf in any::<bool>(), keys in 1u64..5000) {
        let spec = WorkloadSpec {
            op_count: 500,
            key_space_size: keys,
            read_fraction: 0.2,
            delete_fraction: 0.1,
            distribution: if zipf { Distribution::zipfian() } else { Distribution::Uniform },
            seed,
            ..WorkloadSpec::default()
        };
        let a: Vec<Op> = generate(&spec).unwrap().collect();
        let b: Vec<Op> = generate(&spec).unwrap().collect();
        prop_assert_eq!(a.len(), 500);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ids_stay_in_key_space(seed in any::<u64>(), keys in 1u64..1000, theta in 0.1f64..2.0) {
        let spec = WorkloadSpec {
            key_space_size: keys,
            distribution: Distribution::Zipfian { theta },
            seed,
            ..WorkloadSpec::default()
        };
        let mut stream = generate(&spec).unwrap();
        for _ in 0..200 {
            prop_assert!(stream.sample_id() < keys);
        }
    }
}
