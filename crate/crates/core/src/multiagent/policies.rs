use std::collections::BTreeMap;
use std::rc::Rc;

use super::{pd_opponent_defected, pd_space};
use crate::bayes::{BayesPolicy, BayesPolicyState, ThompsonPolicy, ThompsonState};
use crate::rl::{Action, ActionDist, History, Percept, Policy, RlError, TabularPolicy};

/// Explicit table from own histories to action distributions, with a
/// fallback for histories outside the table.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HistoryPolicy {
    pub table: BTreeMap<History, ActionDist>,
    pub default: ActionDist,
}

impl HistoryPolicy {
    /// Equivalent finite-state controller: one state per table entry plus a
    /// sink that plays the default forever. Requires the table to be closed
    /// under prefixes, so that leaving it is permanent.
    pub fn to_tabular(&self, n_percepts: usize) -> Result<TabularPolicy, RlError> {
        let keys: Vec<&History> = self.table.keys().collect();
        let index: BTreeMap<&History, usize> = keys.iter().enumerate().map(|(k, h)| (*h, k)).collect();
        for h in &keys {
            if let Some((_, rest)) = h.cycles.split_last() {
                let parent = History { cycles: rest.to_vec() };
                if !self.table.contains_key(&parent) {
                    return Err(RlError::InvalidPolicy(format!("table is not prefix-closed at length {}", h.len())));
                }
            }
        }
        let sink = keys.len();
        let mut dists: Vec<ActionDist> = keys.iter().map(|h| self.table[*h].clone()).collect();
        dists.push(self.default.clone());
        let mut next: Vec<[Vec<usize>; 2]> = keys
            .iter()
            .map(|h| {
                Action::ALL
                    .map(|a| (0..n_percepts).map(|e| *index.get(&h.with(a, Percept(e))).unwrap_or(&sink)).collect())
            })
            .collect();
        next.push([vec![sink; n_percepts], vec![sink; n_percepts]]);
        let initial = index.get(&History::new()).copied().unwrap_or(sink);
        TabularPolicy::new(n_percepts, initial, dists, next)
    }
}

impl Policy for HistoryPolicy {
    type State = History;

    fn initial(&self) -> History {
        History::new()
    }

    fn action_dist(&self, h: &History) -> Result<ActionDist, RlError> {
        Ok(self.table.get(h).unwrap_or(&self.default).clone())
    }

    fn update(&self, h: &History, a: Action, e: Percept) -> Result<History, RlError> {
        Ok(h.with(a, e))
    }
}

/// Any policy an agent can follow inside a game.
#[derive(Debug, Clone)]
pub enum AnyPolicy {
    Tabular(TabularPolicy),
    History(HistoryPolicy),
    Bayes(Rc<BayesPolicy>),
    Thompson(Rc<ThompsonPolicy>),
    Completed(Rc<CompletedPolicy>),
}

/// A policy that may be undefined on histories its own model rules out
/// (a Bayes agent whose posterior vanishes), completed there by a tabular
/// fallback which is tracked along the whole history.
#[derive(Debug, Clone)]
pub struct CompletedPolicy {
    pub primary: AnyPolicy,
    pub fallback: TabularPolicy,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnyPolicyState {
    Tabular(usize),
    History(History),
    Bayes(BayesPolicyState),
    Thompson(ThompsonState),
    /// Primary state while it is defined, and the fallback's state.
    Completed(Option<Box<AnyPolicyState>>, usize),
}

impl From<TabularPolicy> for AnyPolicy {
    fn from(p: TabularPolicy) -> Self {
        AnyPolicy::Tabular(p)
    }
}

impl From<HistoryPolicy> for AnyPolicy {
    fn from(p: HistoryPolicy) -> Self {
        AnyPolicy::History(p)
    }
}

fn mismatch() -> RlError {
    RlError::InvalidPolicy("state does not belong to this policy".into())
}

impl Policy for AnyPolicy {
    type State = AnyPolicyState;

    fn initial(&self) -> AnyPolicyState {
        match self {
            AnyPolicy::Tabular(p) => AnyPolicyState::Tabular(p.initial()),
            AnyPolicy::History(p) => AnyPolicyState::History(p.initial()),
            AnyPolicy::Bayes(p) => AnyPolicyState::Bayes(p.initial()),
            AnyPolicy::Thompson(p) => AnyPolicyState::Thompson(p.initial()),
            AnyPolicy::Completed(p) => {
                AnyPolicyState::Completed(Some(Box::new(p.primary.initial())), p.fallback.initial())
            }
        }
    }

    fn action_dist(&self, s: &AnyPolicyState) -> Result<ActionDist, RlError> {
        match (self, s) {
            (AnyPolicy::Tabular(p), AnyPolicyState::Tabular(x)) => p.action_dist(x),
            (AnyPolicy::History(p), AnyPolicyState::History(x)) => p.action_dist(x),
            (AnyPolicy::Bayes(p), AnyPolicyState::Bayes(x)) => p.action_dist(x),
            (AnyPolicy::Thompson(p), AnyPolicyState::Thompson(x)) => p.action_dist(x),
            (AnyPolicy::Completed(p), AnyPolicyState::Completed(x, f)) => match x {
                Some(x) => p.primary.action_dist(x),
                None => p.fallback.action_dist(f),
            },
            _ => Err(mismatch()),
        }
    }

    fn update(&self, s: &AnyPolicyState, a: Action, e: Percept) -> Result<AnyPolicyState, RlError> {
        Ok(match (self, s) {
            (AnyPolicy::Tabular(p), AnyPolicyState::Tabular(x)) => AnyPolicyState::Tabular(p.update(x, a, e)?),
            (AnyPolicy::History(p), AnyPolicyState::History(x)) => AnyPolicyState::History(p.update(x, a, e)?),
            (AnyPolicy::Bayes(p), AnyPolicyState::Bayes(x)) => AnyPolicyState::Bayes(p.update(x, a, e)?),
            (AnyPolicy::Thompson(p), AnyPolicyState::Thompson(x)) => AnyPolicyState::Thompson(p.update(x, a, e)?),
            (AnyPolicy::Completed(p), AnyPolicyState::Completed(x, f)) => {
                let primary = match x {
                    None => None,
                    Some(x) => match p.primary.update(x, a, e) {
                        Ok(next) => Some(Box::new(next)),
                        Err(RlError::PosteriorUndefined) => None,
                        Err(err) => return Err(err),
                    },
                };
                AnyPolicyState::Completed(primary, p.fallback.update(f, a, e)?)
            }
            _ => return Err(mismatch()),
        })
    }
}

/// Grim trigger with deadline `t`: cooperate (α) at steps `1..=t` while the
/// opponent has never defected, defect (β) forever after. `None` is the
/// deadline-free version.
pub fn pd_grim_policy(t: Option<u64>) -> TabularPolicy {
    let n_percepts = pd_space().len();
    let coop_states = match t {
        Some(t) => t as usize,
        None => 1,
    };
    let defect = coop_states;
    let mut dists = vec![ActionDist::deterministic(Action::Alpha); coop_states];
    dists.push(ActionDist::deterministic(Action::Beta));
    let mut next = Vec::with_capacity(coop_states + 1);
    for s in 0..coop_states {
        let calm = if t.is_some() { s + 1 } else { s };
        let row: Vec<usize> =
            (0..n_percepts).map(|e| if pd_opponent_defected(Percept(e)) { defect } else { calm }).collect();
        next.push([row.clone(), row]);
    }
    next.push([vec![defect; n_percepts], vec![defect; n_percepts]]);
    let initial = if coop_states == 0 { defect } else { 0 };
    TabularPolicy::new(n_percepts, initial, dists, next).expect("well-formed grim controller")
}
