use std::collections::BTreeMap;

use num::{One, Zero};

use super::{joint_actions, joint_index, GameError, HistoryPolicy, TabularGame};
use crate::rational::Rational;
use crate::rl::{Action, ActionDist, Discount, History, TieRule};

pub const DEFAULT_TREE_BUDGET: usize = 1 << 16;

/// Result of backward induction on the truncated game.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquilibriumReport {
    pub policies: Vec<HistoryPolicy>,
    /// Normalized root values of the truncated game, one per agent.
    pub values: Vec<Rational>,
    /// `Γ_{1+m} / Γ_1`, the discounted mass cut off by the truncation.
    pub tail: Rational,
    pub nodes: usize,
}

/// Equilibrium of a two-player, two-action simultaneous stage game.
///
/// `u[k][a1][a2]` is agent `k`'s payoff. Pure equilibria are tried first in
/// lexicographic order of `(a1, a2)`; without one, the game has a unique
/// completely mixed equilibrium which is returned.
pub fn solve_stage_game(u: &[[[Rational; 2]; 2]; 2]) -> Result<([ActionDist; 2], [Rational; 2]), GameError> {
    for a1 in 0..2 {
        for a2 in 0..2 {
            if u[0][a1][a2] >= u[0][1 - a1][a2] && u[1][a1][a2] >= u[1][a1][1 - a2] {
                let d = [
                    ActionDist::deterministic(Action::from_index(a1)),
                    ActionDist::deterministic(Action::from_index(a2)),
                ];
                return Ok((d, [u[0][a1][a2].clone(), u[1][a1][a2].clone()]));
            }
        }
    }
    // p makes agent 2 indifferent, q makes agent 1 indifferent.
    let den2 = &u[1][0][0] - &u[1][1][0] - &u[1][0][1] + &u[1][1][1];
    let den1 = &u[0][0][0] - &u[0][0][1] - &u[0][1][0] + &u[0][1][1];
    if den1.is_zero() || den2.is_zero() {
        return Err(GameError::InvalidGame("degenerate stage game without a pure equilibrium".into()));
    }
    let p = (&u[1][1][1] - &u[1][1][0]) / den2;
    let q = (&u[0][1][1] - &u[0][0][1]) / den1;
    let value = |k: usize| {
        let mut v = Rational::zero();
        for (a1, w1) in [(0, p.clone()), (1, Rational::one() - &p)] {
            for (a2, w2) in [(0, q.clone()), (1, Rational::one() - &q)] {
                v += &w1 * &w2 * &u[k][a1][a2];
            }
        }
        v
    };
    let values = [value(0), value(1)];
    Ok(([ActionDist::new(p)?, ActionDist::new(q)?], values))
}

struct Solver<'a> {
    game: &'a TabularGame,
    discount: &'a Discount,
    tie: &'a TieRule,
    budget: usize,
    nodes: usize,
    tables: Vec<BTreeMap<History, ActionDist>>,
}

impl Solver<'_> {
    /// Records agent `k`'s choice at its own history, failing when two nodes
    /// the agent cannot tell apart demand different choices.
    fn record(&mut self, k: usize, h: &History, d: ActionDist) -> Result<(), GameError> {
        match self.tables[k].get(h) {
            Some(prev) if *prev != d => {
                Err(GameError::Unsupported("an agent's own history does not identify the game-tree node".into()))
            }
            _ => {
                self.tables[k].insert(h.clone(), d);
                Ok(())
            }
        }
    }

    fn solve(&mut self, state: usize, views: &[History], t: u64, depth: u32) -> Result<Vec<Rational>, GameError> {
        let n = self.game.agents();
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(GameError::TreeBudget(self.budget));
        }
        if depth == 0 || self.discount.tail(t).is_zero() {
            return Ok(vec![Rational::zero(); n]);
        }
        let w = self.discount.step_weight(t);
        let c = self.discount.continuation(t);
        // Payoff to each agent of each joint action, continuation included.
        let mut payoff: Vec<Vec<Rational>> = Vec::with_capacity(1 << n);
        for joint in joint_actions(n) {
            let mut acc = vec![Rational::zero(); n];
            for o in self.game.outcomes(state, &joint) {
                if o.prob.is_zero() {
                    continue;
                }
                let child_views: Vec<History> =
                    views.iter().enumerate().map(|(k, h)| h.with(joint[k], o.percepts[k])).collect();
                let cont = self.solve(o.next, &child_views, t + 1, depth - 1)?;
                for k in 0..n {
                    let r = self.game.space(k).reward(o.percepts[k]);
                    acc[k] += &o.prob * (&w * r + &c * &cont[k]);
                }
            }
            payoff.push(acc);
        }
        match n {
            1 => {
                let (qa, qb) = (&payoff[0][0], &payoff[1][0]);
                let d = if qa > qb {
                    ActionDist::deterministic(Action::Alpha)
                } else if qb > qa {
                    ActionDist::deterministic(Action::Beta)
                } else {
                    self.tie.dist()
                };
                let v = d.prob(Action::Alpha) * qa + d.prob(Action::Beta) * qb;
                self.record(0, &views[0], d)?;
                Ok(vec![v])
            }
            2 => {
                let mut u: [[[Rational; 2]; 2]; 2] = Default::default();
                for (k, uk) in u.iter_mut().enumerate() {
                    for a1 in Action::ALL {
                        for a2 in Action::ALL {
                            uk[a1.index()][a2.index()] = payoff[joint_index(&[a1, a2])][k].clone();
                        }
                    }
                }
                let ([d1, d2], v) = solve_stage_game(&u)?;
                self.record(0, &views[0], d1)?;
                self.record(1, &views[1], d2)?;
                Ok(v.to_vec())
            }
            _ => Err(GameError::Unsupported(format!("equilibrium computation for {n} agents"))),
        }
    }
}

/// Subgame-perfect equilibrium of the game truncated after `m` steps, by
/// backward induction over the joint tree. Off the tree each returned policy
/// plays the tie rule's distribution.
pub fn informed_equilibrium(
    game: &TabularGame,
    discount: &Discount,
    m: u32,
    tie: &TieRule,
    budget: usize,
) -> Result<EquilibriumReport, GameError> {
    let n = game.agents();
    let mut solver = Solver { game, discount, tie, budget, nodes: 0, tables: vec![BTreeMap::new(); n] };
    let views = vec![History::new(); n];
    let values = solver.solve(game.initial(), &views, 1, m)?;
    let default = tie.dist();
    let policies = solver.tables.into_iter().map(|table| HistoryPolicy { table, default: default.clone() }).collect();
    Ok(EquilibriumReport { policies, values, tail: discount.tail_ratio(1, m as u64), nodes: solver.nodes })
}
