mod common;

use common::{arb_bits, arb_program, brute_eval, brute_runtime};
use grain_core::machine::{eval_truncated, library, Bits, Registry};
use grain_core::oracle::{
    answer, branch_probs, completed_bounds, extends, is_partially_reflective, Answer, PartialOracle, ViolationKind,
};
use grain_core::rational::{dyadic, rat, Rational};
use num::{One, Zero};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const COPIER: &str = "ORACLE 1, ε, 1/2\nJZ z\nOUT1\nz: OUT0\n";

fn registry(srcs: &[&str]) -> Registry {
    let mut r = Registry::new();
    for s in srcs {
        r.register_source(s).unwrap();
    }
    r
}

fn mixed_registry() -> Registry {
    registry(&[library::DIAGONALIZER, library::CONST_ONE, COPIER, library::ECHO, library::FAIR_COIN])
}

fn inputs() -> Vec<Bits> {
    ["ε", "0", "1", "00", "01"].iter().map(|s| s.parse().unwrap()).collect()
}

/// Random level-`k` oracle and a child that keeps every old value exactly.
fn arb_value_preserving_pair(max_level: u32) -> impl Strategy<Value = (u32, Vec<u64>, u64)> {
    (1..=max_level).prop_flat_map(|k| {
        let top = 1u64 << k;
        (Just(k), prop::collection::vec(0..=top, k as usize), 0..=(2 * top))
    })
}

#[test]
fn answer_probabilities_for_the_midpoint() {
    let reg = registry(&[library::FAIR_COIN]);
    let po = PartialOracle::for_registry(&reg, 3, vec![4, 8, 0]).unwrap();
    assert_eq!(po.answer_distribution(1), (rat(7, 16), rat(7, 16), rat(1, 8)));
    assert_eq!(po.answer_distribution(2), (rat(15, 16), rat(0, 1), rat(1, 16)));
    assert_eq!(po.answer_distribution(3), (rat(0, 1), rat(15, 16), rat(1, 16)));
    assert_eq!(po.answer_distribution(4), (rat(0, 1), rat(0, 1), rat(1, 1)));
}

#[test]
fn sampled_answers_follow_the_distribution() {
    let reg = registry(&[library::FAIR_COIN]);
    let po = PartialOracle::for_registry(&reg, 2, vec![4, 0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 4000;
    let ones = (0..n).filter(|_| answer(&po, 1, &mut rng) == Answer::One).count();
    // P(one) = 1 - 1/8; a loose band keeps the check seed-independent.
    let f = ones as f64 / n as f64;
    assert!((f - 0.875).abs() < 0.03, "frequency {f}");
    assert!((0..100).all(|_| answer(&po, 2, &mut rng) != Answer::One));
}

#[test]
fn value_moving_by_the_allowed_step_can_lower_output_mass() {
    // Under the 2^{-k-1} answer offset a refinement that moves a value by one
    // grid step towards 0 lowers the one-branch by more than the offset gains.
    let reg = registry(&[library::DIAGONALIZER, COPIER]);
    let parent = PartialOracle::for_registry(&reg, 3, vec![4, 4, 4]).unwrap();
    let child = PartialOracle::for_registry(&reg, 4, vec![7, 8, 8, 8]).unwrap();
    assert!(extends(&child, &parent).unwrap());
    let a = eval_truncated(&reg, 2, &Bits::empty(), &parent).unwrap();
    let b = eval_truncated(&reg, 2, &Bits::empty(), &child).unwrap();
    assert_eq!(a.p1, rat(7, 16));
    assert_eq!(b.p1, rat(13, 32));
    assert!(b.p1 < a.p1);
}

#[test]
fn diagonalizer_admits_only_the_midpoint() {
    let reg = registry(&[library::DIAGONALIZER]);
    for k in 3..=6u32 {
        for n in 0..=(1u64 << k) {
            let mut values = vec![0u64; k as usize];
            values[0] = n;
            let po = PartialOracle::for_registry(&reg, k, values).unwrap();
            let v = is_partially_reflective(&po, &reg).unwrap();
            if n == 1 << (k - 1) {
                assert!(v.as_ref().is_none_or(|v| v.query_index != 1), "level {k}: midpoint rejected on q_1");
            } else {
                let v = v.expect("off-midpoint value must fail");
                assert_eq!(v.query_index, 1);
                let kind = if n > 1 << (k - 1) { ViolationKind::MustBeZero } else { ViolationKind::MustBeOne };
                assert_eq!(v.kind, kind);
            }
        }
    }
}

proptest! {
    #[test]
    fn answer_distribution_is_a_distribution(k in 1u32..=12, n in 0u64..=4096) {
        let reg = registry(&[library::CONST_ONE]);
        let n = n % ((1u64 << k) + 1);
        let mut values = vec![0; k as usize];
        values[0] = n;
        let po = PartialOracle::for_registry(&reg, k, values).unwrap();
        let (one, zero, halt) = po.answer_distribution(1);
        prop_assert_eq!(&one + &zero + &halt, Rational::one());
        prop_assert!(one >= Rational::zero() && zero >= Rational::zero() && halt >= Rational::zero());
        prop_assert_eq!((one, zero), branch_probs(&dyadic(n, k), k));
        // Before clamping the halt branch carries 2^{-k}; clamping a negative
        // branch to zero can only take mass back from it, down to 2^{-k-1}.
        prop_assert!(halt <= dyadic(1, k) && halt >= dyadic(1, k + 1));
    }

    #[test]
    fn text_form_round_trips((k, values, _) in arb_value_preserving_pair(8)) {
        let reg = mixed_registry();
        let po = PartialOracle::for_registry(&reg, k, values).unwrap();
        prop_assert_eq!(PartialOracle::from_text(&po.to_text(), &reg).unwrap(), po.clone());
        let other = registry(&[library::CONST_ZERO]);
        prop_assert!(PartialOracle::from_text(&po.to_text(), &other).is_err());
    }

    #[test]
    fn extends_is_one_child_grid_step((k, values, extra) in arb_value_preserving_pair(8), shift in -2i64..=2, at in 0usize..8) {
        let reg = mixed_registry();
        let parent = PartialOracle::for_registry(&reg, k, values.clone()).unwrap();
        let mut child: Vec<u64> = values.iter().map(|v| 2 * v).collect();
        child.push(extra);
        let at = at % k as usize;
        let moved = child[at] as i64 + shift;
        prop_assume!(moved >= 0 && moved <= 1 << (k + 1));
        child[at] = moved as u64;
        let child = PartialOracle::for_registry(&reg, k + 1, child).unwrap();
        prop_assert_eq!(extends(&child, &parent).unwrap(), shift.abs() <= 1);
        prop_assert!(extends(&parent, &parent).is_err());
    }

    #[test]
    fn refinement_that_keeps_old_values_is_monotone((k, values, extra) in arb_value_preserving_pair(6)) {
        let reg = mixed_registry();
        let parent = PartialOracle::for_registry(&reg, k, values.clone()).unwrap();
        let mut child: Vec<u64> = values.iter().map(|v| 2 * v).collect();
        child.push(extra);
        let child = PartialOracle::for_registry(&reg, k + 1, child).unwrap();
        prop_assert!(extends(&child, &parent).unwrap());
        for m in 1..=reg.len() {
            for x in inputs() {
                let a = eval_truncated(&reg, m, &x, &parent).unwrap();
                let b = eval_truncated(&reg, m, &x, &child).unwrap();
                prop_assert!(a.p1 <= b.p1 && a.p0 <= b.p0, "machine {} input {}", m, x);
                let outer = completed_bounds(&parent, &reg, m, &x).unwrap();
                let inner = completed_bounds(&child, &reg, m, &x).unwrap();
                prop_assert!(inner.is_within(&outer));
            }
        }
    }

    #[test]
    fn truncated_values_never_exceed_the_limit(prog in arb_program(6), input in arb_bits(2), k in 1u32..=8) {
        prop_assume!(brute_runtime(&prog, &input, 40).is_some());
        let mut reg = Registry::new();
        reg.register_program(prog.clone());
        let po = PartialOracle::for_registry(&reg, k, vec![0; k as usize]).unwrap();
        let d = eval_truncated(&reg, 1, &input, &po).unwrap();
        let (p1, p0) = brute_eval(&prog, &input, 40);
        prop_assert!(d.p1 <= p1 && d.p0 <= p0);
        let bounds = completed_bounds(&po, &reg, 1, &input).unwrap();
        prop_assert!(bounds.contains(&p1));
    }
}
