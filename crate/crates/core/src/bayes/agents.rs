use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;
use std::sync::Arc;

use num::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{BayesError, BayesState, Belief, ClassMember, EnvironmentClass, MixtureEnv};
use crate::machine::builtins::{Mixture, MixtureLayout};
use crate::machine::Registry;
use crate::rational::{self, Rational};
use crate::rl::{
    effective_horizon, optimal_action_from, Action, ActionDecision, ActionDist, AnyEnv, AnyState, Discount, HellEnv,
    Percept, PlanCache, Policy, RlError, TabularPolicy, TieRule,
};

/// Plan caches are dropped once they hold this many entries.
const CACHE_LIMIT: usize = 400_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BayesPolicyState {
    pub belief: Belief,
    pub t: u64,
}

/// Acts optimally for the Bayes mixture at every history.
#[derive(Debug)]
pub struct BayesPolicy {
    mixture: MixtureEnv,
    discount: Discount,
    eps: Rational,
    tie: TieRule,
    cache: RefCell<PlanCache<Belief>>,
    decisions: RefCell<HashMap<BayesPolicyState, ActionDecision>>,
}

impl BayesPolicy {
    pub fn new(state: &BayesState, discount: Discount, eps: Rational, tie: TieRule) -> Result<Self, BayesError> {
        if eps <= Rational::zero() {
            return Err(BayesError::BadPrecision);
        }
        Ok(BayesPolicy {
            mixture: state.mixture().clone(),
            discount,
            eps,
            tie,
            cache: RefCell::new(PlanCache::new()),
            decisions: RefCell::new(HashMap::new()),
        })
    }

    pub fn mixture(&self) -> &MixtureEnv {
        &self.mixture
    }

    pub fn discount(&self) -> &Discount {
        &self.discount
    }

    pub fn decide(&self, s: &BayesPolicyState) -> Result<ActionDecision, RlError> {
        if let Some(d) = self.decisions.borrow().get(s) {
            return Ok(d.clone());
        }
        let mut cache = self.cache.borrow_mut();
        if cache.len() > CACHE_LIMIT {
            cache.clear();
        }
        let d = optimal_action_from(&self.mixture, &self.discount, &s.belief, s.t, &self.eps, &self.tie, &mut cache)?;
        self.decisions.borrow_mut().insert(s.clone(), d.clone());
        Ok(d)
    }
}

impl Policy for BayesPolicy {
    type State = BayesPolicyState;

    fn initial(&self) -> BayesPolicyState {
        use crate::rl::Environment;
        BayesPolicyState { belief: self.mixture.initial(), t: 1 }
    }

    fn action_dist(&self, s: &BayesPolicyState) -> Result<ActionDist, RlError> {
        Ok(self.decide(s)?.dist)
    }

    fn update(&self, s: &BayesPolicyState, a: Action, e: Percept) -> Result<BayesPolicyState, RlError> {
        let (belief, _) = self.mixture.step(&s.belief, a, e)?;
        Ok(BayesPolicyState { belief, t: s.t + 1 })
    }
}

/// Internal state of the Thompson policy as seen from outside: the belief
/// plus a distribution over the sampled member and its remaining commitment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ThompsonState {
    pub belief: Belief,
    pub t: u64,
    /// `(member, steps left, probability)`, sorted and merged.
    pub hidden: Vec<(usize, u64, Rational)>,
}

/// Thompson sampling with commitment for one effective horizon. A member
/// refuted by the data is dropped immediately and a new one drawn.
///
/// As a [`Policy`] it is the action distribution marginalized over the
/// agent's own sampling, conditioned on its past actions. [`ThompsonActor`]
/// is the sampling agent itself.
#[derive(Debug)]
pub struct ThompsonPolicy {
    mixture: MixtureEnv,
    discount: Discount,
    eps: Rational,
    eps_resample: Rational,
    tie: TieRule,
    caches: RefCell<Vec<PlanCache<AnyState>>>,
    decisions: RefCell<HashMap<(usize, AnyState, u64), ActionDist>>,
}

impl ThompsonPolicy {
    pub fn new(
        state: &BayesState,
        discount: Discount,
        eps: Rational,
        eps_resample: Rational,
        tie: TieRule,
    ) -> Result<Self, BayesError> {
        if eps <= Rational::zero() || eps_resample <= Rational::zero() {
            return Err(BayesError::BadPrecision);
        }
        let n = state.mixture().class().len();
        Ok(ThompsonPolicy {
            mixture: state.mixture().clone(),
            discount,
            eps,
            eps_resample,
            tie,
            caches: RefCell::new((0..n).map(|_| PlanCache::new()).collect()),
            decisions: RefCell::new(HashMap::new()),
        })
    }

    pub fn mixture(&self) -> &MixtureEnv {
        &self.mixture
    }

    /// Commitment length for a sample drawn at time `t`.
    pub fn period(&self, t: u64) -> Result<u64, RlError> {
        Ok(effective_horizon(&self.discount, t, &self.eps_resample)?.max(1))
    }

    /// Optimal action distribution of member `i` in its state `s` at time `t`.
    pub fn member_action(&self, i: usize, s: &AnyState, t: u64) -> Result<ActionDist, RlError> {
        let t_key = if self.discount.is_stationary() { 0 } else { t };
        let key = (i, s.clone(), t_key);
        if let Some(d) = self.decisions.borrow().get(&key) {
            return Ok(d.clone());
        }
        let env = &self.mixture.class().member(i).env;
        let mut caches = self.caches.borrow_mut();
        if caches[i].len() > CACHE_LIMIT {
            caches[i].clear();
        }
        let d = optimal_action_from(env, &self.discount, s, t, &self.eps, &self.tie, &mut caches[i])?.dist;
        self.decisions.borrow_mut().insert(key, d.clone());
        Ok(d)
    }

    fn resampled(&self, belief: &Belief, t: u64, mass: &Rational) -> Result<Vec<(usize, u64, Rational)>, RlError> {
        let h = self.period(t)?;
        Ok(belief.weights.iter().enumerate().filter(|(_, w)| !w.is_zero()).map(|(i, w)| (i, h, mass * w)).collect())
    }
}

fn merged(entries: Vec<(usize, u64, Rational)>) -> Vec<(usize, u64, Rational)> {
    let mut m: BTreeMap<(usize, u64), Rational> = BTreeMap::new();
    for (i, r, w) in entries {
        *m.entry((i, r)).or_insert_with(Rational::zero) += w;
    }
    m.into_iter().filter(|(_, w)| !w.is_zero()).map(|((i, r), w)| (i, r, w)).collect()
}

impl Policy for ThompsonPolicy {
    type State = ThompsonState;

    fn initial(&self) -> ThompsonState {
        use crate::rl::Environment;
        let belief = self.mixture.initial();
        let hidden = self.resampled(&belief, 1, &Rational::one()).expect("positive tail at t = 1");
        ThompsonState { belief, t: 1, hidden: merged(hidden) }
    }

    fn action_dist(&self, s: &ThompsonState) -> Result<ActionDist, RlError> {
        let mut alpha = Rational::zero();
        for (i, _, w) in &s.hidden {
            alpha += w * self.member_action(*i, &s.belief.states[*i], s.t)?.prob(Action::Alpha);
        }
        ActionDist::new(alpha)
    }

    fn update(&self, s: &ThompsonState, a: Action, e: Percept) -> Result<ThompsonState, RlError> {
        let mut kept = Vec::new();
        let mut total = Rational::zero();
        for (i, r, w) in &s.hidden {
            let p = self.member_action(*i, &s.belief.states[*i], s.t)?.prob(a);
            if p.is_zero() {
                continue;
            }
            let nw = w * p;
            total += &nw;
            kept.push((*i, *r, nw));
        }
        if total.is_zero() {
            return Err(RlError::InvalidPolicy(format!("action {a} has probability zero")));
        }
        let (belief, _) = self.mixture.step(&s.belief, a, e)?;
        let t = s.t + 1;
        let mut hidden = Vec::new();
        let mut expired = Rational::zero();
        for (i, r, w) in kept {
            let w = w / &total;
            if r <= 1 || belief.weights[i].is_zero() {
                expired += w;
            } else {
                hidden.push((i, r - 1, w));
            }
        }
        if !expired.is_zero() {
            hidden.extend(self.resampled(&belief, t, &expired)?);
        }
        Ok(ThompsonState { belief, t, hidden: merged(hidden) })
    }
}

/// The sampling Thompson agent: draws a member from the posterior, follows
/// its optimal policy for one period, then draws again.
#[derive(Debug)]
pub struct ThompsonActor {
    policy: Rc<ThompsonPolicy>,
    belief: Belief,
    t: u64,
    current: usize,
    remaining: u64,
    rng: ChaCha8Rng,
}

impl ThompsonActor {
    pub fn new(policy: Rc<ThompsonPolicy>, seed: u64) -> Self {
        use crate::rl::Environment;
        let belief = policy.mixture.initial();
        ThompsonActor { policy, belief, t: 1, current: 0, remaining: 0, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn policy(&self) -> &Rc<ThompsonPolicy> {
        &self.policy
    }

    pub fn belief(&self) -> &Belief {
        &self.belief
    }

    /// Member currently followed, once the first sample has been drawn.
    pub fn current(&self) -> Option<usize> {
        (self.t > 1 || self.remaining > 0).then_some(self.current)
    }

    /// Draws a new member if the commitment has run out, then returns the
    /// followed member's action distribution.
    pub fn next_dist(&mut self) -> Result<ActionDist, RlError> {
        if self.remaining == 0 {
            self.current =
                rational::sample_index(&self.belief.weights, &mut self.rng).ok_or(RlError::PosteriorUndefined)?;
            self.remaining = self.policy.period(self.t)?;
        }
        self.policy.member_action(self.current, &self.belief.states[self.current], self.t)
    }

    pub fn observe(&mut self, a: Action, e: Percept) -> Result<(), RlError> {
        let (b, _) = self.policy.mixture.step(&self.belief, a, e)?;
        self.belief = b;
        self.t += 1;
        self.remaining = self.remaining.saturating_sub(1);
        if self.belief.weights[self.current].is_zero() {
            self.remaining = 0;
        }
        Ok(())
    }
}

/// Thompson agent seeded for reproducibility.
pub fn thompson_policy(
    state: &BayesState,
    discount: Discount,
    eps: Rational,
    eps_resample: Rational,
    tie: TieRule,
    seed: u64,
) -> Result<ThompsonActor, BayesError> {
    let p = ThompsonPolicy::new(state, discount, eps, eps_resample, tie)?;
    Ok(ThompsonActor::new(Rc::new(p), seed))
}

/// Extends a class with hell-grafted copies of every member.
///
/// Each copy behaves like its original until the agent takes an action the
/// `reference` policy never takes, and pays reward 0 forever from then on.
/// Copies receive weight `lambda * w`, originals `(1 - lambda) * w`.
pub fn dogmatic_class(
    base: &EnvironmentClass,
    prior: &[Rational],
    reference: &TabularPolicy,
    lambda: &Rational,
) -> Result<(EnvironmentClass, Vec<Rational>), BayesError> {
    if *lambda <= Rational::zero() || *lambda >= Rational::one() || prior.len() != base.len() {
        return Err(BayesError::BadPrior);
    }
    let mut members = Vec::with_capacity(2 * base.len());
    let mut weights = Vec::with_capacity(2 * base.len());
    for (m, w) in base.members().iter().zip(prior) {
        members.push(m.clone());
        weights.push((Rational::one() - lambda) * w);
    }
    for (m, w) in base.members().iter().zip(prior) {
        let hell = HellEnv::new(m.env.clone(), reference.clone())?;
        members.push(ClassMember::new(format!("{}+hell", m.name), hell, m.code_length.map(|l| l + 1)));
        weights.push(lambda * w);
    }
    Ok((EnvironmentClass::new(members)?, weights))
}

/// Registers the Bayes mixture of `state`'s prior as a built-in machine of
/// `registry`, which must be the registry backing every class member.
pub fn register_mixture_as_machine(registry: &mut Registry, state: &BayesState) -> Result<usize, BayesError> {
    let class = state.mixture().class();
    let fp = registry.fingerprint();
    let mut members = Vec::with_capacity(class.len());
    for (m, w) in class.members().iter().zip(state.mixture().prior()) {
        match &m.env {
            AnyEnv::Machine(me) if me.registry().fingerprint() == fp => members.push((me.index(), w.clone())),
            _ => return Err(BayesError::NotRegistryBacked(m.name.clone())),
        }
    }
    let layout = MixtureLayout { action_bits: 1, percept_bits: class.percepts().code_len() };
    let mixture = Mixture::new(members, layout)?;
    Ok(registry.register_builtin(Arc::new(mixture)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::rl::{PerceptSpace, TabularEnv};

    fn det_bandit(good: Action) -> TabularEnv {
        let win = vec![rat(0, 1), rat(1, 1)];
        let lose = vec![rat(1, 1), rat(0, 1)];
        match good {
            Action::Alpha => TabularEnv::bandit(PerceptSpace::binary(), win, lose),
            Action::Beta => TabularEnv::bandit(PerceptSpace::binary(), lose, win),
        }
        .unwrap()
    }

    fn two_armed() -> BayesState {
        let class = EnvironmentClass::new(vec![
            ClassMember::new("alpha-good", det_bandit(Action::Alpha), None),
            ClassMember::new("beta-good", det_bandit(Action::Beta), None),
        ])
        .unwrap();
        BayesState::new(Arc::new(class), &[rat(1, 2), rat(1, 2)]).unwrap()
    }

    fn half() -> Discount {
        Discount::geometric(rat(1, 2)).unwrap()
    }

    #[test]
    fn bayes_policy_learns_the_two_armed_bandit() {
        let s = two_armed();
        let pi = BayesPolicy::new(&s, half(), rat(1, 100), TieRule::FixedAlpha).unwrap();
        let s0 = pi.initial();
        // Symmetric prior: a tie, broken towards α.
        assert_eq!(pi.action_dist(&s0).unwrap(), ActionDist::deterministic(Action::Alpha));
        // α pays nothing, so β is the good arm.
        let s1 = pi.update(&s0, Action::Alpha, Percept(0)).unwrap();
        assert_eq!(s1.belief.weights, vec![rat(0, 1), rat(1, 1)]);
        assert_eq!(pi.action_dist(&s1).unwrap(), ActionDist::deterministic(Action::Beta));
    }

    #[test]
    fn thompson_collapses_after_one_percept() {
        let s = two_armed();
        let mut actor = thompson_policy(&s, half(), rat(1, 100), rat(1, 10), TieRule::FixedAlpha, 7).unwrap();
        let first = actor.next_dist().unwrap().as_deterministic().unwrap();
        let reward = usize::from(first == Action::Beta);
        actor.observe(first, Percept(reward)).unwrap();
        for _ in 0..10 {
            let a = actor.next_dist().unwrap().as_deterministic().unwrap();
            assert_eq!(a, Action::Beta);
            actor.observe(a, Percept(1)).unwrap();
        }
    }

    #[test]
    fn thompson_marginal_mixes_members() {
        let s = two_armed();
        let pi = ThompsonPolicy::new(&s, half(), rat(1, 100), rat(1, 10), TieRule::FixedAlpha).unwrap();
        let s0 = pi.initial();
        assert_eq!(pi.action_dist(&s0).unwrap(), ActionDist::uniform());
        assert_eq!(pi.period(1).unwrap(), 4);
        // Playing α reveals that alpha-good was sampled. A reward of 1 keeps
        // it for the rest of the period.
        let kept = pi.update(&s0, Action::Alpha, Percept(1)).unwrap();
        assert_eq!(kept.hidden, vec![(0, 3, rat(1, 1))]);
        // A reward of 0 refutes it and forces an immediate redraw.
        let s1 = pi.update(&s0, Action::Alpha, Percept(0)).unwrap();
        assert_eq!(s1.hidden, vec![(1, 4, rat(1, 1))]);
        assert_eq!(pi.action_dist(&s1).unwrap(), ActionDist::deterministic(Action::Beta));
    }

    #[test]
    fn single_member_thompson_matches_bayes() {
        let class = EnvironmentClass::new(vec![ClassMember::new("b", det_bandit(Action::Beta), None)]).unwrap();
        let s = BayesState::new(Arc::new(class), &[rat(1, 1)]).unwrap();
        let bayes = BayesPolicy::new(&s, half(), rat(1, 100), TieRule::FixedAlpha).unwrap();
        let th = ThompsonPolicy::new(&s, half(), rat(1, 100), rat(1, 10), TieRule::FixedAlpha).unwrap();
        assert_eq!(bayes.action_dist(&bayes.initial()).unwrap(), th.action_dist(&th.initial()).unwrap());
    }

    #[test]
    fn dogmatic_weights() {
        let class = EnvironmentClass::new(vec![ClassMember::new("b", det_bandit(Action::Beta), Some(2))]).unwrap();
        let pi = TabularPolicy::constant(Action::Alpha, 2);
        let (c, w) = dogmatic_class(&class, &[rat(1, 1)], &pi, &rat(9, 10)).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(w, vec![rat(1, 10), rat(9, 10)]);
        assert_eq!(c.member(1).name, "b+hell");
        assert!(dogmatic_class(&class, &[rat(1, 1)], &pi, &rat(1, 1)).is_err());
    }

    #[test]
    fn mixture_registration_requires_machine_members() {
        let s = two_armed();
        let mut reg = Registry::new();
        assert!(matches!(register_mixture_as_machine(&mut reg, &s), Err(BayesError::NotRegistryBacked(_))));
    }
}
