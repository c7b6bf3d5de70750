//! Property tests for the order, fractal, and measure invariants.

use loch_core::cnum::{fmt_complex, parse_complex};
use loch_core::hata::{
    added_length_at_level, branch_measure, enumerate_branches, generate_approximation, IfsParams,
};
use loch_core::linalg::C64;
use loch_core::measure::{
    Carrier, ExtendedMeasure, InductiveMeasureSystem, MeasureSpaceNode, SetExpr,
};
use loch_core::order::{is_sequentially_finite, ChainWitness, DirectedSet};
use loch_core::testkit;
use proptest::prelude::*;
use rand::Rng;
use std::collections::BTreeMap;

fn arb_params() -> impl Strategy<Value = IfsParams> {
    ((-0.95f64..0.95), (0.02f64..0.95))
        .prop_map(|(re, im)| (re, im))
        .prop_filter_map("parameter constraints", |(re, im)| {
            IfsParams::new(C64::new(re, im)).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn complex_literals_round_trip(re in -1e3f64..1e3, im in -1e3f64..1e3) {
        let z = C64::new(re, im);
        let back = parse_complex(&fmt_complex(z)).unwrap();
        prop_assert_eq!(z, back);
    }

    #[test]
    fn upper_bounds_are_symmetric_joint_bounds(seed in 0u64..5000) {
        let mut r = testkit::rng(seed);
        let ds = testkit::random_directed_set(&mut r, 6);
        for (a, b) in ds.unordered_pairs() {
            let u1 = ds.upper_bound(&a, &b).unwrap();
            let u2 = ds.upper_bound(&b, &a).unwrap();
            prop_assert_eq!(&u1, &u2);
            prop_assert!(ds.leq(&a, &u1).unwrap());
            prop_assert!(ds.leq(&b, &u1).unwrap());
        }
    }

    #[test]
    fn down_sets_are_monotone(seed in 0u64..5000) {
        let mut r = testkit::rng(seed);
        let ds = testkit::random_directed_set(&mut r, 6);
        for (lo, hi) in ds.comparable_pairs() {
            let dl = ds.down_set(&lo).unwrap();
            let dh = ds.down_set(&hi).unwrap();
            for el in &dl {
                prop_assert!(dh.contains(el), "{el} escapes the larger down-set");
            }
        }
    }

    #[test]
    fn chains_to_the_top_certify_and_survive_relabeling(seed in 0u64..5000) {
        let mut r = testkit::rng(seed);
        let ds = testkit::random_directed_set(&mut r, 6);
        let w = testkit::random_witness(&mut r, &ds);
        prop_assert!(is_sequentially_finite(&ds, &w).is_ok());
        // relabel all identifiers and re-verify
        let rename = |s: &str| format!("Z{s}Q");
        let elements: Vec<String> = ds.elements().iter().map(|e| rename(e)).collect();
        let mut pairs: Vec<(String, String)> = ds
            .comparable_pairs()
            .into_iter()
            .map(|(a, b)| (rename(&a), rename(&b)))
            .collect();
        for e in ds.elements() {
            pairs.push((rename(e), rename(e)));
        }
        let relabeled = DirectedSet::validate(&elements, &pairs).unwrap();
        let w2 = ChainWitness {
            chain: w.chain.iter().map(|e| rename(e)).collect(),
        };
        prop_assert!(is_sequentially_finite(&relabeled, &w2).is_ok());
    }

    #[test]
    fn branch_counts_hold_for_random_parameters(p in arb_params(), n in 0usize..8) {
        prop_assert_eq!(enumerate_branches(&p, n).len(), (1usize << n) + 1);
    }

    #[test]
    fn branch_measure_recursion_holds_for_random_parameters(p in arb_params(), n in 0usize..7) {
        let direct = branch_measure(&enumerate_branches(&p, n));
        let mut formula = branch_measure(&enumerate_branches(&p, 0));
        for k in 0..n {
            formula += added_length_at_level(&p, k);
        }
        prop_assert!((direct - formula).abs() < 1e-10 * (1.0 + formula));
    }

    #[test]
    fn levels_nest_for_random_parameters(p in arb_params(), n in 0usize..5) {
        let level = generate_approximation(&p, n);
        let next = generate_approximation(&p, n + 1);
        for s in &level.segments {
            for z in s.sample(4) {
                prop_assert!(next.distance_to(z) <= 1e-12);
            }
        }
    }
}

/// Randomized oracle: finite additivity of atomic node measures over one
/// hundred random partitions.
#[test]
fn random_atomic_partitions_are_additive() {
    let mut r = testkit::rng(2024);
    for case in 0..100 {
        let atom_count = r.gen_range(1..=12usize);
        let atoms: BTreeMap<String, f64> = (0..atom_count)
            .map(|k| (format!("a{k}"), r.gen_range(0.01..5.0)))
            .collect();
        let index = DirectedSet::chain(&["n".into()]).unwrap();
        let mut nodes = BTreeMap::new();
        nodes.insert(
            "n".to_string(),
            MeasureSpaceNode {
                carrier: Carrier::atomic(atoms.clone()),
            },
        );
        let sys = InductiveMeasureSystem::validate(index, nodes, None, None).unwrap();
        // random partition into up to four groups
        let groups = r.gen_range(1..=4usize);
        let mut family: Vec<Vec<String>> = vec![Vec::new(); groups];
        for id in atoms.keys() {
            family[r.gen_range(0..groups)].push(id.clone());
        }
        let family: Vec<SetExpr> = family
            .into_iter()
            .map(|ids| SetExpr::Members(ids.into_iter().collect()))
            .collect();
        let cert = sys
            .check_local_sigma_additivity("n", &family)
            .unwrap_or_else(|e| panic!("case {case}: {e}"));
        let total: f64 = atoms.values().sum();
        assert!((cert.union_measure - total).abs() < 1e-12 * (1.0 + total));
    }
}

/// Extended measures are monotone across randomly nested member sets.
#[test]
fn extended_measure_monotone_on_random_nested_sets() {
    let mut r = testkit::rng(4100);
    let p = IfsParams::default_figure();
    let hs = loch_core::hata::build_inductive_system(loch_core::hata::SystemVariant::Linear, &p, 3)
        .unwrap();
    let ids: Vec<String> = hs
        .system
        .node("X3")
        .unwrap()
        .carrier
        .ids()
        .into_iter()
        .collect();
    for _ in 0..100 {
        let small: Vec<String> = ids.iter().filter(|_| r.gen_bool(0.4)).cloned().collect();
        let mut big = small.clone();
        big.extend(ids.iter().filter(|_| r.gen_bool(0.4)).cloned());
        let ms = hs
            .system
            .extended_measure(&SetExpr::Members(small.into_iter().collect()))
            .unwrap();
        let mb = hs
            .system
            .extended_measure(&SetExpr::Members(big.into_iter().collect()))
            .unwrap();
        match (ms, mb) {
            (ExtendedMeasure::Finite(a), ExtendedMeasure::Finite(b)) => {
                assert!(a <= b + 1e-12)
            }
            _ => panic!("member sets are bounded"),
        }
    }
}
