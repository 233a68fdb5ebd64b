use std::fmt::{self, Debug};
use std::hash::Hash;

use num::{One, Zero};
use rand::RngCore;

use super::{Action, History, Percept, RlError};
use crate::rational::{self, Rational};

/// Distribution over the two actions, stored as the probability of α.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionDist {
    alpha: Rational,
}

impl ActionDist {
    pub fn new(alpha: Rational) -> Result<Self, RlError> {
        if alpha < Rational::zero() || alpha > Rational::one() {
            return Err(RlError::InvalidPolicy(format!("P(α) = {}", rational::show(&alpha))));
        }
        Ok(ActionDist { alpha })
    }

    pub fn deterministic(a: Action) -> Self {
        ActionDist { alpha: if a == Action::Alpha { Rational::one() } else { Rational::zero() } }
    }

    pub fn uniform() -> Self {
        ActionDist { alpha: rational::rat(1, 2) }
    }

    pub fn prob(&self, a: Action) -> Rational {
        match a {
            Action::Alpha => self.alpha.clone(),
            Action::Beta => Rational::one() - &self.alpha,
        }
    }

    pub fn alpha(&self) -> &Rational {
        &self.alpha
    }

    /// The action taken with certainty, if any.
    pub fn as_deterministic(&self) -> Option<Action> {
        if self.alpha.is_one() {
            Some(Action::Alpha)
        } else if self.alpha.is_zero() {
            Some(Action::Beta)
        } else {
            None
        }
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Action {
        if let Some(a) = self.as_deterministic() {
            return a;
        }
        if rational::uniform(rng) < self.alpha {
            Action::Alpha
        } else {
            Action::Beta
        }
    }

    /// Swap the roles of α and β.
    pub fn swapped(&self) -> ActionDist {
        ActionDist { alpha: Rational::one() - &self.alpha }
    }
}

impl fmt::Display for ActionDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "α:{} β:{}", rational::show(&self.alpha), rational::show(&self.prob(Action::Beta)))
    }
}

/// Action distribution conditioned on an explicit internal state.
pub trait Policy {
    type State: Clone + Eq + Hash + Ord + Debug;

    fn initial(&self) -> Self::State;
    fn action_dist(&self, s: &Self::State) -> Result<ActionDist, RlError>;
    fn update(&self, s: &Self::State, a: Action, e: Percept) -> Result<Self::State, RlError>;

    fn state_after(&self, h: &History) -> Result<Self::State, RlError> {
        let mut s = self.initial();
        for (a, e) in &h.cycles {
            s = self.update(&s, *a, *e)?;
        }
        Ok(s)
    }
}

/// Finite-state controller: `next[s][a][e]` is the successor state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TabularPolicy {
    n_percepts: usize,
    initial: usize,
    dists: Vec<ActionDist>,
    next: Vec<[Vec<usize>; 2]>,
}

impl TabularPolicy {
    pub fn new(
        n_percepts: usize,
        initial: usize,
        dists: Vec<ActionDist>,
        next: Vec<[Vec<usize>; 2]>,
    ) -> Result<Self, RlError> {
        let n = dists.len();
        if n == 0 || initial >= n || next.len() != n {
            return Err(RlError::InvalidPolicy("state count mismatch".into()));
        }
        for row in &next {
            for succ in row {
                if succ.len() != n_percepts || succ.iter().any(|&x| x >= n) {
                    return Err(RlError::InvalidPolicy("bad successor table".into()));
                }
            }
        }
        Ok(TabularPolicy { n_percepts, initial, dists, next })
    }

    pub fn constant(a: Action, n_percepts: usize) -> Self {
        Self::stateless(ActionDist::deterministic(a), n_percepts)
    }

    pub fn uniform(n_percepts: usize) -> Self {
        Self::stateless(ActionDist::uniform(), n_percepts)
    }

    pub fn stateless(d: ActionDist, n_percepts: usize) -> Self {
        TabularPolicy { n_percepts, initial: 0, dists: vec![d], next: vec![[vec![0; n_percepts], vec![0; n_percepts]]] }
    }

    /// Plays `cycle` periodically, ignoring percepts.
    pub fn cyclic(cycle: &[Action], n_percepts: usize) -> Result<Self, RlError> {
        let n = cycle.len();
        if n == 0 {
            return Err(RlError::InvalidPolicy("empty cycle".into()));
        }
        let dists = cycle.iter().map(|&a| ActionDist::deterministic(a)).collect();
        let next = (0..n).map(|s| [vec![(s + 1) % n; n_percepts], vec![(s + 1) % n; n_percepts]]).collect();
        Self::new(n_percepts, 0, dists, next)
    }

    pub fn num_percepts(&self) -> usize {
        self.n_percepts
    }

    pub fn num_states(&self) -> usize {
        self.dists.len()
    }

    pub fn dist(&self, s: usize) -> &ActionDist {
        &self.dists[s]
    }

    /// Same controller with α and β exchanged everywhere.
    pub fn relabeled(&self) -> TabularPolicy {
        TabularPolicy {
            n_percepts: self.n_percepts,
            initial: self.initial,
            dists: self.dists.iter().map(ActionDist::swapped).collect(),
            next: self.next.iter().map(|[a, b]| [b.clone(), a.clone()]).collect(),
        }
    }
}

impl Policy for TabularPolicy {
    type State = usize;

    fn initial(&self) -> usize {
        self.initial
    }

    fn action_dist(&self, s: &usize) -> Result<ActionDist, RlError> {
        self.dists.get(*s).cloned().ok_or_else(|| RlError::InvalidPolicy(format!("state {s}")))
    }

    fn update(&self, s: &usize, a: Action, e: Percept) -> Result<usize, RlError> {
        self.next.get(*s).and_then(|row| row[a.index()].get(e.0)).copied().ok_or(RlError::BadPercept(e.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use rand::SeedableRng;

    #[test]
    fn cyclic_policy_repeats() {
        let p = TabularPolicy::cyclic(&[Action::Alpha, Action::Alpha, Action::Beta], 2).unwrap();
        let mut s = p.initial();
        let mut seen = Vec::new();
        for _ in 0..6 {
            let a = p.action_dist(&s).unwrap().as_deterministic().unwrap();
            seen.push(a.letter());
            s = p.update(&s, a, Percept(0)).unwrap();
        }
        assert_eq!(seen.iter().collect::<String>(), "aabaab");
    }

    #[test]
    fn dist_validation_and_sampling() {
        assert!(ActionDist::new(rat(3, 2)).is_err());
        let d = ActionDist::new(rat(1, 4)).unwrap();
        assert_eq!(d.prob(Action::Beta), rat(3, 4));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let alphas = (0..2000).filter(|_| d.sample(&mut rng) == Action::Alpha).count();
        assert!((400..600).contains(&alphas), "{alphas}");
        assert_eq!(ActionDist::deterministic(Action::Beta).sample(&mut rng), Action::Beta);
    }

    #[test]
    fn relabeling_swaps_actions() {
        let p = TabularPolicy::cyclic(&[Action::Alpha, Action::Beta], 1).unwrap();
        let q = p.relabeled();
        assert_eq!(q.action_dist(&0).unwrap(), ActionDist::deterministic(Action::Beta));
        assert_eq!(q.update(&0, Action::Alpha, Percept(0)).unwrap(), 1);
    }
}
