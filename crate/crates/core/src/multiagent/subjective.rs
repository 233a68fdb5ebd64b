use std::collections::{BTreeMap, HashMap, VecDeque};

use num::{One, Zero};

use super::{joint_actions, AnyPolicy, AnyPolicyState, GameError, TabularGame};
use crate::oracle::ProbabilityInterval;
use crate::rational::Rational;
use crate::rl::{
    optimal_value_from, state_after, value_from, Action, Discount, Environment, History, Percept, PerceptSpace,
    PlanCache, Policy, RlError, TabularEnv, TabularPolicy, ValueInterval, ValueReport,
};

/// Default cap on the number of joint hypotheses a belief may carry.
pub const DEFAULT_SUPPORT_BOUND: usize = 4096;

/// Exact posterior over what agent `i` cannot see.
///
/// Joint histories consistent with the agent's view are lumped by the
/// information that matters for the future: the game state and the internal
/// state of every other agent's policy. Histories that agree on both have
/// identical continuations, so the lumped weights give the same conditionals
/// as summing over the histories themselves.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointBelief {
    pub support: BTreeMap<(usize, Vec<AnyPolicyState>), Rational>,
}

impl JointBelief {
    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

/// The single-agent environment agent `i` faces when every other agent
/// follows a known policy.
#[derive(Debug, Clone)]
pub struct SubjectiveEnv {
    game: TabularGame,
    agent: usize,
    /// Policies of the other agents, in agent order with `agent` skipped.
    others: Vec<AnyPolicy>,
    bound: usize,
}

/// Builds agent `i`'s subjective environment from the full policy profile.
/// The entry `policies[i]` is ignored.
pub fn subjective_env(game: &TabularGame, policies: &[AnyPolicy], i: usize) -> Result<SubjectiveEnv, GameError> {
    let n = game.agents();
    if policies.len() != n {
        return Err(GameError::PolicyCount { expected: n, got: policies.len() });
    }
    if i >= n {
        return Err(GameError::InvalidGame(format!("agent {i} out of range")));
    }
    let others = policies.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| p.clone()).collect();
    Ok(SubjectiveEnv { game: game.clone(), agent: i, others, bound: DEFAULT_SUPPORT_BOUND })
}

impl SubjectiveEnv {
    pub fn with_support_bound(mut self, bound: usize) -> Self {
        self.bound = bound;
        self
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    fn joint(&self, own: Action, rest: &[Action]) -> Vec<Action> {
        let mut v = rest.to_vec();
        v.insert(self.agent, own);
        v
    }

    fn others_of(&self, v: &[Percept]) -> Vec<Percept> {
        v.iter().enumerate().filter(|(j, _)| *j != self.agent).map(|(_, e)| *e).collect()
    }

    /// Every joint move of the other agents with its probability in the given states.
    fn other_moves(&self, states: &[AnyPolicyState]) -> Result<Vec<(Vec<Action>, Rational)>, RlError> {
        let dists = self.others.iter().zip(states).map(|(p, s)| p.action_dist(s)).collect::<Result<Vec<_>, _>>()?;
        let mut out = Vec::new();
        for acts in joint_actions(self.others.len()) {
            let p = acts.iter().zip(&dists).fold(Rational::one(), |acc, (a, d)| acc * d.prob(*a));
            if !p.is_zero() {
                out.push((acts, p));
            }
        }
        Ok(out)
    }
}

impl Environment for SubjectiveEnv {
    type State = JointBelief;

    fn percepts(&self) -> &PerceptSpace {
        self.game.space(self.agent)
    }

    fn initial(&self) -> JointBelief {
        let states = self.others.iter().map(|p| p.initial()).collect();
        let mut support = BTreeMap::new();
        support.insert((self.game.initial(), states), Rational::one());
        JointBelief { support }
    }

    fn conditional(&self, b: &JointBelief, a: Action) -> Result<Vec<ProbabilityInterval>, RlError> {
        let mut mass = vec![Rational::zero(); self.percepts().len()];
        for ((g, states), w) in &b.support {
            for (rest, p) in self.other_moves(states)? {
                let wp = w * &p;
                for o in self.game.outcomes(*g, &self.joint(a, &rest)) {
                    mass[o.percepts[self.agent].0] += &wp * &o.prob;
                }
            }
        }
        Ok(mass.into_iter().map(ProbabilityInterval::point).collect())
    }

    fn transition(&self, b: &JointBelief, a: Action, e: Percept) -> Result<JointBelief, RlError> {
        let mut support: BTreeMap<(usize, Vec<AnyPolicyState>), Rational> = BTreeMap::new();
        let mut total = Rational::zero();
        for ((g, states), w) in &b.support {
            for (rest, p) in self.other_moves(states)? {
                for o in self.game.outcomes(*g, &self.joint(a, &rest)) {
                    if o.percepts[self.agent] != e || o.prob.is_zero() {
                        continue;
                    }
                    let mass = w * &p * &o.prob;
                    let next_states = self
                        .others
                        .iter()
                        .zip(states)
                        .zip(rest.iter().zip(self.others_of(&o.percepts)))
                        .map(|((pol, s), (aj, ej))| pol.update(s, *aj, ej))
                        .collect::<Result<Vec<_>, _>>()?;
                    total += &mass;
                    *support.entry((o.next, next_states)).or_insert_with(Rational::zero) += mass;
                }
            }
        }
        if total.is_zero() {
            return Err(RlError::PosteriorUndefined);
        }
        if support.len() > self.bound {
            return Err(RlError::InvalidConditional(format!(
                "joint belief support {} exceeds the bound {}",
                support.len(),
                self.bound
            )));
        }
        for w in support.values_mut() {
            *w /= &total;
        }
        Ok(JointBelief { support })
    }
}

/// Game state together with every co-player's controller state.
type ProductState = (usize, Vec<usize>);

/// Agent `i`'s environment against fixed tabular co-players, flattened into
/// one [`TabularEnv`] over product states. Fails when the agent's own percept
/// does not pin down the successor product state.
pub fn induced_env(game: &TabularGame, i: usize, others: &[TabularPolicy]) -> Result<TabularEnv, GameError> {
    let n = game.agents();
    if others.len() + 1 != n || i >= n {
        return Err(GameError::PolicyCount { expected: n - 1, got: others.len() });
    }
    let space = game.space(i).clone();
    let start = (game.initial(), others.iter().map(|p| p.initial()).collect::<Vec<_>>());
    let mut index: HashMap<ProductState, usize> = HashMap::new();
    let mut order = vec![start.clone()];
    index.insert(start, 0);
    let mut queue = VecDeque::from([0usize]);
    let mut rows: Vec<[Vec<(Rational, usize)>; 2]> = Vec::new();
    while let Some(k) = queue.pop_front() {
        let (g, states) = order[k].clone();
        let mut row: [Vec<(Rational, usize)>; 2] = [Vec::new(), Vec::new()];
        for a in Action::ALL {
            let mut by_percept: Vec<(Rational, Option<ProductState>)> = vec![(Rational::zero(), None); space.len()];
            for rest in joint_actions(others.len()) {
                let p = rest
                    .iter()
                    .zip(others)
                    .zip(&states)
                    .fold(Rational::one(), |acc, ((aj, pol), s)| acc * pol.dist(*s).prob(*aj));
                if p.is_zero() {
                    continue;
                }
                let mut joint = rest.clone();
                joint.insert(i, a);
                for o in game.outcomes(g, &joint) {
                    if o.prob.is_zero() {
                        continue;
                    }
                    let mut ej = o.percepts.clone();
                    ej.remove(i);
                    let next_states = others
                        .iter()
                        .zip(&states)
                        .zip(rest.iter().zip(ej))
                        .map(|((pol, s), (aj, e))| pol.update(s, *aj, e))
                        .collect::<Result<Vec<_>, _>>()?;
                    let succ = (o.next, next_states);
                    let slot = &mut by_percept[o.percepts[i].0];
                    match &slot.1 {
                        Some(prev) if *prev != succ => {
                            return Err(GameError::Unsupported(
                                "the agent's percept does not determine the co-players' state".into(),
                            ))
                        }
                        _ => slot.1 = Some(succ),
                    }
                    slot.0 += &p * &o.prob;
                }
            }
            for (prob, succ) in by_percept {
                let next = match succ {
                    None => k,
                    Some(key) => *index.entry(key.clone()).or_insert_with(|| {
                        order.push(key);
                        queue.push_back(order.len() - 1);
                        order.len() - 1
                    }),
                };
                row[a.index()].push((prob, next));
            }
        }
        rows.push(row);
    }
    Ok(TabularEnv::new(space, 0, rows)?)
}

/// Enclosure of `V*(h) - V^π(h)` for one agent in a given environment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapReport {
    pub gap: ValueInterval,
    pub v_star: ValueReport,
    pub v_pi: ValueReport,
}

impl GapReport {
    /// Certified ε-best response: even the upper end of the gap is below `eps`.
    pub fn is_best_response(&self, eps: &Rational) -> bool {
        self.gap.hi < *eps
    }
}

/// Gap of `policy` after its own history `h` in `env`, each value to precision `eps`.
pub fn gap_in_env<E: Environment + ?Sized, P: Policy + ?Sized>(
    env: &E,
    policy: &P,
    discount: &Discount,
    h: &History,
    eps: &Rational,
) -> Result<GapReport, RlError> {
    let s = state_after(env, h)?;
    let ps = policy.state_after(h)?;
    gap_from(env, policy, discount, &s, &ps, h.time(), eps)
}

/// [`gap_in_env`] from explicit environment and policy states at time `t`.
pub fn gap_from<E: Environment + ?Sized, P: Policy + ?Sized>(
    env: &E,
    policy: &P,
    discount: &Discount,
    s: &E::State,
    ps: &P::State,
    t: u64,
    eps: &Rational,
) -> Result<GapReport, RlError> {
    let v_star = optimal_value_from(env, discount, s, t, eps, &mut PlanCache::new())?;
    let v_pi = value_from(policy, env, discount, s, ps, t, eps)?;
    Ok(GapReport { gap: v_star.interval.minus(&v_pi.interval), v_star, v_pi })
}

/// Best-response gap of agent `i` after its own history `h`, measured in its
/// subjective environment against the rest of the profile.
pub fn best_response_gap(
    game: &TabularGame,
    policies: &[AnyPolicy],
    i: usize,
    discount: &Discount,
    h: &History,
    eps: &Rational,
) -> Result<GapReport, GameError> {
    let env = subjective_env(game, policies, i)?;
    Ok(gap_in_env(&env, &policies[i], discount, h, eps)?)
}
