mod common;

use common::{arb_bits, arb_program, brute_eval};
use grain_core::machine::query::{cantor_pair, cantor_unpair, query_at, query_index, threshold_at, threshold_position};
use grain_core::machine::{assemble, enumerate_queries, eval_truncated, library, Bits, Registry};
use grain_core::oracle::PartialOracle;
use grain_core::rational::{rat, Rational};
use num::{One, Zero};
use proptest::prelude::*;

fn golden(name: &str) -> String {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name);
    std::fs::read_to_string(path).expect("golden file")
}

#[test]
fn first_three_queries_of_a_one_machine_registry() {
    let mut reg = Registry::new();
    reg.register_source(library::CONST_ONE).unwrap();
    let lines: Vec<String> =
        enumerate_queries(&reg, 3).iter().enumerate().map(|(i, q)| format!("{} {q}", i + 1)).collect();
    assert_eq!(lines.join("\n") + "\n", golden("queries_r1_n3.txt"));
    assert_eq!(enumerate_queries(&reg, 3), enumerate_queries(&reg, 3));
    assert!(enumerate_queries(&reg, 0).is_empty());
}

#[test]
fn registration_order_and_quining() {
    let mut reg = Registry::new();
    assert_eq!(reg.register_source(library::CONST_ZERO).unwrap(), 1);
    assert_eq!(reg.register_source(library::DIAGONALIZER).unwrap(), 2);
    assert!(assemble("OUT2").is_err());
    // The diagonalizer asks about machine 2 on ε, so its own query is (2, ε, 1/2),
    // which is q_2 in a two-machine registry.
    let po = PartialOracle::for_registry(&reg, 3, vec![0, 4, 0]).unwrap();
    let d = eval_truncated(&reg, 2, &Bits::empty(), &po).unwrap();
    // Value 1/2 at level 3: each answer has probability 1/2 - 1/16.
    assert_eq!((d.p1.clone(), d.p0.clone()), (rat(7, 16), rat(7, 16)));
    // Two steps are not enough to reach an output.
    let short = PartialOracle::for_registry(&reg, 2, vec![0, 2]).unwrap();
    assert!(eval_truncated(&reg, 2, &Bits::empty(), &short).unwrap().p1.is_zero());
}

#[test]
fn diagonalizer_bounds_at_several_levels() {
    let mut reg = Registry::new();
    reg.register_source(library::DIAGONALIZER).unwrap();
    for k in 4..=8u32 {
        let mut values = vec![0u64; k as usize];
        values[0] = 1 << (k - 1);
        let po = PartialOracle::for_registry(&reg, k, values).unwrap();
        let d = eval_truncated(&reg, 1, &Bits::empty(), &po).unwrap();
        let expect = rat(1, 2) - Rational::new(1.into(), num::BigInt::from(1u64 << (k + 1)));
        assert_eq!(d.p1, expect, "level {k}");
        assert_eq!(d.p0, expect, "level {k}");
    }
}

#[test]
fn looping_and_constant_machines() {
    let mut reg = Registry::new();
    reg.register_source(library::CONST_ONE).unwrap();
    reg.register_source(library::LOOP).unwrap();
    let po = PartialOracle::for_registry(&reg, 5, vec![0; 5]).unwrap();
    let one = eval_truncated(&reg, 1, &Bits::empty(), &po).unwrap();
    assert_eq!((one.p1, one.p0), (Rational::one(), Rational::zero()));
    let lp = eval_truncated(&reg, 2, &Bits::empty(), &po).unwrap();
    assert_eq!((lp.p1, lp.p0), (Rational::zero(), Rational::zero()));
}

proptest! {
    #[test]
    fn evaluator_matches_path_enumeration(prog in arb_program(7), input in arb_bits(3), k in 1u32..=10) {
        let mut reg = Registry::new();
        reg.register_program(prog.clone());
        let po = PartialOracle::for_registry(&reg, k, vec![0; k as usize]).unwrap();
        let d = eval_truncated(&reg, 1, &input, &po).unwrap();
        let (p1, p0) = brute_eval(&prog, &input, k);
        prop_assert_eq!(&d.p1, &p1);
        prop_assert_eq!(&d.p0, &p0);
        prop_assert!(d.p1 >= Rational::zero() && d.p0 >= Rational::zero());
        prop_assert!(&d.p1 + &d.p0 <= Rational::one());
        prop_assert_eq!(eval_truncated(&reg, 1, &input, &po).unwrap(), d);
    }

    #[test]
    fn oracle_free_mass_only_grows_with_the_step_budget(prog in arb_program(7), input in arb_bits(3), k in 1u32..=9) {
        let mut reg = Registry::new();
        reg.register_program(prog);
        let lo = PartialOracle::for_registry(&reg, k, vec![0; k as usize]).unwrap();
        let hi = PartialOracle::for_registry(&reg, k + 1, vec![0; k as usize + 1]).unwrap();
        let a = eval_truncated(&reg, 1, &input, &lo).unwrap();
        let b = eval_truncated(&reg, 1, &input, &hi).unwrap();
        prop_assert!(a.p1 <= b.p1 && a.p0 <= b.p0);
    }

    #[test]
    fn oracle_branches_keep_total_mass_at_most_one(
        v1 in 0u64..=16, v2 in 0u64..=16, v3 in 0u64..=16, v4 in 0u64..=16, input in arb_bits(2),
    ) {
        let mut reg = Registry::new();
        reg.register_source(library::DIAGONALIZER).unwrap();
        reg.register_source("ORACLE 1, IN, 1/4\nJZ z\nORACLE 1, ε, 3/4\nJZ z\nOUT1\nz: OUT0\n").unwrap();
        let po = PartialOracle::for_registry(&reg, 4, vec![v1, v2, v3, v4]).unwrap();
        for m in 1..=2 {
            let d = eval_truncated(&reg, m, &input, &po).unwrap();
            prop_assert!(d.is_valid());
            prop_assert!(&d.p1 + &d.p0 <= Rational::one());
        }
    }

    #[test]
    fn query_enumeration_is_a_bijection(size in 1usize..6, i in 1u64..5000) {
        let q = query_at(size, i).unwrap();
        prop_assert_eq!(query_index(size, &q), Some(i));
        prop_assert!(q.machine >= 1 && q.machine <= size);
    }

    #[test]
    fn pairing_round_trips(s in 0u64..2000, d in 0u64..2000) {
        prop_assert_eq!(cantor_unpair(cantor_pair(s, d)), (s, d));
        prop_assert_eq!(threshold_position(&threshold_at(d)), Some(d));
    }
}
