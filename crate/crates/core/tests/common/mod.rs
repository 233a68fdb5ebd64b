//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the evaluator, the expectimax planner or the belief
//! filter of the library; each helper recomputes its quantity from first
//! principles so the library results can be compared against it.
#![allow(dead_code)]

use std::collections::BTreeMap;

use grain_core::machine::{Bits, Instr, Program};
use grain_core::multiagent::{Outcome, TabularGame};
use grain_core::rational::{rat, Rational};
use grain_core::rl::{
    Action, ActionDist, Discount, Environment, Percept, PerceptSpace, Policy, TabularEnv, TabularPolicy,
};
use num::{One, Zero};
use proptest::prelude::*;

// ---------------------------------------------------------------------------
// Oracle-free programs
// ---------------------------------------------------------------------------

/// Path-by-path output probabilities of an oracle-free program within `budget`
/// steps. Exponential in the number of coin flips; meant for tiny programs.
pub fn brute_eval(prog: &Program, input: &Bits, budget: u32) -> (Rational, Rational) {
    let mut p1 = Rational::zero();
    let mut p0 = Rational::zero();
    walk(prog.instrs(), input, 0, Vec::new(), 0, budget, Rational::one(), &mut |bit, w| {
        if bit {
            p1 += w;
        } else {
            p0 += w;
        }
    });
    (p1, p0)
}

/// Longest run over every coin path, or `None` if some path is still running
/// after `cap` steps.
pub fn brute_runtime(prog: &Program, input: &Bits, cap: u32) -> Option<u32> {
    fn go(code: &[Instr], input: &Bits, pc: usize, stack: Vec<bool>, pos: usize, used: u32, cap: u32) -> Option<u32> {
        let Some(ins) = code.get(pc) else { return Some(used) };
        if used >= cap {
            return None;
        }
        let used = used + 1;
        let mut stack = stack;
        match ins {
            Instr::Coin => {
                let mut best = 0;
                for b in [true, false] {
                    let mut s = stack.clone();
                    s.push(b);
                    best = best.max(go(code, input, pc + 1, s, pos, used, cap)?);
                }
                Some(best)
            }
            Instr::Out(_) | Instr::Halt => Some(used),
            other => match step_plain(other, input, pc, &mut stack, pos) {
                Some((npc, npos)) => go(code, input, npc, stack, npos, used, cap),
                None => Some(used),
            },
        }
    }
    go(prog.instrs(), input, 0, Vec::new(), 0, 0, cap)
}

/// One non-branching, non-terminal instruction. `None` means the machine
/// stops without output.
fn step_plain(ins: &Instr, input: &Bits, pc: usize, stack: &mut Vec<bool>, pos: usize) -> Option<(usize, usize)> {
    match ins {
        Instr::Input => {
            let b = input.get(pos)?;
            stack.push(b);
            Some((pc + 1, pos + 1))
        }
        Instr::Push(b) => {
            stack.push(*b);
            Some((pc + 1, pos))
        }
        Instr::Pop => stack.pop().map(|_| (pc + 1, pos)),
        Instr::Dup => {
            let b = *stack.last()?;
            stack.push(b);
            Some((pc + 1, pos))
        }
        Instr::Not => {
            let b = stack.pop()?;
            stack.push(!b);
            Some((pc + 1, pos))
        }
        Instr::Jmp(t) => Some((*t, pos)),
        Instr::Jz(t) => {
            let b = stack.pop()?;
            Some((if b { pc + 1 } else { *t }, pos))
        }
        other => panic!("reference interpreter does not model {other:?}"),
    }
}

#[allow(clippy::too_many_arguments)]
fn walk(
    code: &[Instr],
    input: &Bits,
    pc: usize,
    mut stack: Vec<bool>,
    pos: usize,
    budget: u32,
    w: Rational,
    emit: &mut dyn FnMut(bool, Rational),
) {
    let Some(ins) = code.get(pc) else { return };
    if budget == 0 {
        return;
    }
    match ins {
        Instr::Coin => {
            let half = &w / rat(2, 1);
            for b in [true, false] {
                let mut s = stack.clone();
                s.push(b);
                walk(code, input, pc + 1, s, pos, budget - 1, half.clone(), emit);
            }
        }
        Instr::Out(b) => emit(*b, w),
        Instr::Halt => {}
        other => {
            if let Some((npc, npos)) = step_plain(other, input, pc, &mut stack, pos) {
                walk(code, input, npc, stack, npos, budget - 1, w, emit);
            }
        }
    }
}

/// Random oracle-free program of `1..=max_len` instructions. Jumps may loop.
pub fn arb_program(max_len: usize) -> impl Strategy<Value = Program> {
    (1..=max_len).prop_flat_map(|n| {
        prop::collection::vec((0u8..10, 0..n), n).prop_map(|ops| {
            let instrs = ops
                .into_iter()
                .map(|(op, t)| match op {
                    0 => Instr::Coin,
                    1 => Instr::Input,
                    2 => Instr::Push(false),
                    3 => Instr::Push(true),
                    4 => Instr::Dup,
                    5 => Instr::Not,
                    6 => Instr::Jz(t),
                    7 => Instr::Jmp(t),
                    8 => Instr::Out(false),
                    _ => Instr::Out(true),
                })
                .collect();
            Program::from_instrs(instrs)
        })
    })
}

pub fn arb_bits(max_len: usize) -> impl Strategy<Value = Bits> {
    prop::collection::vec(any::<bool>(), 0..=max_len).prop_map(Bits)
}

// ---------------------------------------------------------------------------
// Tabular environments
// ---------------------------------------------------------------------------

/// A probability with denominator 4.
fn quarter(n: u8) -> Rational {
    rat(n as i64, 4)
}

/// Random environment over the binary reward space with `states` states.
pub fn arb_tabular_env(max_states: usize) -> impl Strategy<Value = TabularEnv> {
    (1..=max_states, 0usize..max_states).prop_flat_map(|(n, init)| {
        prop::collection::vec((0u8..=4, 0..n, 0..n), 2 * n).prop_map(move |cells| {
            let rows = cells
                .chunks(2)
                .map(|c| {
                    let mk = |(p, n0, n1): (u8, usize, usize)| vec![(quarter(4 - p), n0), (quarter(p), n1)];
                    [mk(c[0]), mk(c[1])]
                })
                .collect();
            TabularEnv::new(PerceptSpace::binary(), init % n, rows).expect("rows sum to one")
        })
    })
}

/// Deterministic policy for a horizon-3 problem over two percepts, indexed by
/// the 7 decision bits: the root, then one per first percept, then one per
/// pair of percepts. Actions taken earlier are fixed by the policy itself.
pub fn horizon3_action(bits: u8, percepts: &[usize]) -> Action {
    let slot = match percepts {
        [] => 0,
        [e1] => 1 + e1,
        [e1, e2] => 3 + 2 * e1 + e2,
        _ => unreachable!("horizon 3"),
    };
    Action::from_index(((bits >> slot) & 1) as usize)
}

/// `Σ_{k=1}^{3} (1−γ) γ^{k−1} E[r_k]` for one deterministic policy; the
/// normalized value of the first three steps under geometric discounting.
pub fn horizon3_value(env: &TabularEnv, gamma: &Rational, bits: u8) -> Rational {
    fn go(env: &TabularEnv, gamma: &Rational, bits: u8, s: usize, seen: &mut Vec<usize>, weight: Rational) -> Rational {
        if seen.len() == 3 {
            return Rational::zero();
        }
        let a = horizon3_action(bits, seen);
        let mut total = Rational::zero();
        for (e, (p, next)) in env.row(s, a).iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let r = env.percepts().reward(Percept(e)).clone();
            total += p * &weight * r;
            seen.push(e);
            total += p * go(env, gamma, bits, *next, seen, &weight * gamma);
            seen.pop();
        }
        total
    }
    let w0 = Rational::one() - gamma;
    go(env, gamma, bits, env.initial_state(), &mut Vec::new(), w0)
}

pub fn half() -> Discount {
    Discount::geometric(rat(1, 2)).unwrap()
}

// ---------------------------------------------------------------------------
// Two-player games
// ---------------------------------------------------------------------------

/// Random stochastic stateless controller over `n_percepts`, with α-probability
/// a multiple of 1/4.
pub fn arb_tabular_policy(n_percepts: usize, max_states: usize) -> impl Strategy<Value = TabularPolicy> {
    (1..=max_states).prop_flat_map(move |n| {
        (prop::collection::vec(0u8..=4, n), prop::collection::vec(0..n, 2 * n * n_percepts)).prop_map(
            move |(alphas, succ)| {
                let dists = alphas.iter().map(|&a| ActionDist::new(quarter(a)).unwrap()).collect();
                let next =
                    succ.chunks(2 * n_percepts).map(|c| [c[..n_percepts].to_vec(), c[n_percepts..].to_vec()]).collect();
                TabularPolicy::new(n_percepts, 0, dists, next).unwrap()
            },
        )
    })
}

/// Random two-player game with binary percepts, up to two states and up to
/// two outcomes per joint action.
pub fn arb_game() -> impl Strategy<Value = TabularGame> {
    (1usize..=2).prop_flat_map(|n| {
        prop::collection::vec((0u8..=4, 0usize..4, 0usize..4, 0..n, 0..n), 4 * n).prop_map(move |cells| {
            let outcomes = cells
                .chunks(4)
                .map(|row| {
                    row.iter()
                        .map(|&(p, e_first, e_second, n0, n1)| {
                            let pair = |e: usize| vec![Percept(e & 1), Percept(e >> 1)];
                            let mut v = vec![Outcome { percepts: pair(e_first), prob: quarter(p), next: n0 }];
                            v.push(Outcome { percepts: pair(e_second), prob: quarter(4 - p), next: n1 });
                            v
                        })
                        .collect()
                })
                .collect();
            TabularGame::new(vec![PerceptSpace::binary(), PerceptSpace::binary()], 0, outcomes).unwrap()
        })
    })
}

/// Brute-force `P(e | own history h, own next action a)` for agent `me` of a
/// two-player game, by summing over every joint history whose projection on
/// `me` is `h`. Returns `None` when `h` has probability zero.
pub fn brute_conditional(
    game: &TabularGame,
    me: usize,
    other: &TabularPolicy,
    h: &[(Action, Percept)],
    a: Action,
) -> Option<Vec<Rational>> {
    // Enumerate joint histories of length |h| + 1 with agent `me` playing the
    // recorded actions and then `a`; the weight excludes `me`'s own action
    // probabilities, which cancel in the conditional.
    let mut mass: BTreeMap<usize, Rational> = BTreeMap::new();
    let mut denom = Rational::zero();
    let plan: Vec<Action> = h.iter().map(|(x, _)| *x).chain(std::iter::once(a)).collect();
    #[allow(clippy::too_many_arguments)]
    fn go(
        game: &TabularGame,
        me: usize,
        other: &TabularPolicy,
        h: &[(Action, Percept)],
        plan: &[Action],
        t: usize,
        s: usize,
        os: usize,
        w: Rational,
        mass: &mut BTreeMap<usize, Rational>,
        denom: &mut Rational,
    ) {
        if w.is_zero() {
            return;
        }
        for b in Action::ALL {
            let pb = other.dist(os).prob(b);
            if pb.is_zero() {
                continue;
            }
            let mut joint = vec![Action::Alpha; 2];
            joint[me] = plan[t];
            joint[1 - me] = b;
            for o in game.outcomes(s, &joint) {
                let w2 = &w * &pb * &o.prob;
                if w2.is_zero() {
                    continue;
                }
                let mine = o.percepts[me];
                if t == h.len() {
                    *denom += &w2;
                    *mass.entry(mine.0).or_insert_with(Rational::zero) += w2;
                } else if mine == h[t].1 {
                    let nos = other.update(&os, b, o.percepts[1 - me]).unwrap();
                    go(game, me, other, h, plan, t + 1, o.next, nos, w2, mass, denom);
                }
            }
        }
    }
    go(game, me, other, h, &plan, 0, game.initial(), other.initial(), Rational::one(), &mut mass, &mut denom);
    if denom.is_zero() {
        return None;
    }
    let n = game.space(me).len();
    Some((0..n).map(|e| mass.get(&e).cloned().unwrap_or_else(Rational::zero) / &denom).collect())
}
