mod common;

use common::{arb_program, brute_eval, brute_runtime};
use grain_core::machine::{library, Registry};
use grain_core::oracle::{extends, is_partially_reflective};
use grain_core::rational::{pow2_neg, Rational};
use grain_core::search::{answer_at_level, search, search_with, SearchOptions, SearchStatus};
use num::{One, Zero};
use proptest::prelude::*;

const POOL: &[&str] = &[
    library::DIAGONALIZER,
    library::CONST_ONE,
    library::CONST_ZERO,
    library::FAIR_COIN,
    library::COIN_3_4,
    library::ECHO,
    library::LOOP,
    // Copies machine 1 on ε.
    "ORACLE 1, ε, 1/2\nJZ z\nOUT1\nz: OUT0\n",
    // Asks about itself on its own input with threshold 1/4.
    "ORACLE SELF, IN, 1/4\nJZ z\nOUT0\nz: OUT1\n",
];

fn arb_registry() -> impl Strategy<Value = Registry> {
    prop::collection::vec(0..POOL.len(), 1..=3).prop_map(|picks| {
        let mut r = Registry::new();
        for p in picks {
            r.register_source(POOL[p]).unwrap();
        }
        r
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn emitted_oracles_are_reflective_and_chained(reg in arb_registry(), max_level in 1u32..=4) {
        let trace = search(&reg, max_level, 10_000).unwrap();
        prop_assert_eq!(trace.status, SearchStatus::Complete);
        for e in &trace.emissions {
            prop_assert!(is_partially_reflective(&e.oracle, &reg).unwrap().is_none());
            if let Some(p) = e.parent {
                prop_assert!(extends(&e.oracle, &trace.emissions[p].oracle).unwrap());
            }
        }
        let chain = trace.chain_oracles();
        prop_assert_eq!(chain.len() as u32, max_level);
        for w in chain.windows(2) {
            prop_assert!(extends(w[1], w[0]).unwrap());
        }
        for k in 1..max_level {
            for i in 1..=k as u64 {
                let a = answer_at_level(&trace, i, k).unwrap();
                let b = answer_at_level(&trace, i, k + 1).unwrap();
                let step = if a > b { &a - &b } else { &b - &a };
                prop_assert!(step <= pow2_neg(k + 1));
            }
        }
    }

    #[test]
    fn search_is_deterministic(reg in arb_registry(), max_level in 1u32..=4) {
        let a = search(&reg, max_level, 10_000).unwrap();
        let b = search(&reg, max_level, 10_000).unwrap();
        prop_assert_eq!(&a.emissions, &b.emissions);
        prop_assert_eq!(&a.chain, &b.chain);
        // Lookahead prunes but never changes the accepted chain's validity.
        let plain = search_with(&reg, max_level, 10_000, SearchOptions { lookahead: false }).unwrap();
        if plain.status == SearchStatus::Complete {
            for po in plain.chain_oracles() {
                prop_assert!(is_partially_reflective(po, &reg).unwrap().is_none());
            }
        }
    }

    #[test]
    fn halting_oracle_free_answers_are_forced(progs in prop::collection::vec(arb_program(5), 1..=3)) {
        // Keep the programs that halt on every input used below within 6 steps.
        let mut reg = Registry::new();
        let mut kept = Vec::new();
        for p in progs {
            let fits = (0..7u64).all(|s| {
                brute_runtime(&p, &grain_core::machine::Bits::from_length_lex_index(s), 6).is_some()
            });
            if fits {
                reg.register_program(p.clone());
                kept.push(p);
            }
        }
        prop_assume!(!kept.is_empty());
        let k = 7u32;
        let trace = search(&reg, k, 100_000).unwrap();
        let top = trace.final_oracle().unwrap();
        for i in 1..=k as u64 {
            let q = reg.query(i).unwrap();
            let (p1, p0) = brute_eval(&kept[q.machine - 1], &q.input, 64);
            let v = top.value(i).unwrap();
            if p1 > q.threshold {
                prop_assert!(v.is_one(), "q_{} must be 1", i);
            } else if p0 > Rational::one() - &q.threshold {
                prop_assert!(v.is_zero(), "q_{} must be 0", i);
            }
        }
    }
}

#[test]
fn zero_budget_gives_an_empty_trace() {
    let mut reg = Registry::new();
    reg.register_source(library::CONST_ONE).unwrap();
    let t = search(&reg, 3, 0).unwrap();
    assert!(t.is_empty());
    assert_eq!(t.status, SearchStatus::BudgetExhausted);
}
