use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

use num::{One, Signed, Zero};

use super::env::{state_after, Environment};
use super::policy::{ActionDist, Policy};
use super::{effective_horizon, Action, Discount, History, Percept, RlError};
use crate::machine::{library, Registry};
use crate::oracle::ProbabilityInterval;
use crate::rational::{self, Rational};

/// Enclosure `[lo, hi]` of a normalized value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ValueInterval {
    pub lo: Rational,
    pub hi: Rational,
}

impl ValueInterval {
    pub fn point(v: Rational) -> Self {
        ValueInterval { lo: v.clone(), hi: v }
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, v: &Rational) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    pub fn midpoint(&self) -> Rational {
        (&self.lo + &self.hi) / rational::int(2)
    }

    /// Enclosure of `self - other`.
    pub fn minus(&self, other: &ValueInterval) -> ValueInterval {
        ValueInterval { lo: &self.lo - &other.hi, hi: &self.hi - &other.lo }
    }
}

impl fmt::Display for ValueInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", rational::show(&self.lo), rational::show(&self.hi))
    }
}

/// A value enclosure with its truncation bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueReport {
    pub interval: ValueInterval,
    /// Expectimax depth `m`.
    pub depth: u32,
    /// `Γ_{t+m} / Γ_t`, the discounted mass beyond the horizon.
    pub tail: Rational,
    /// Width not explained by the tail, i.e. contributed by interval conditionals.
    pub env_width: Rational,
    /// The requested precision was not reached.
    pub flagged: bool,
}

/// What to do when the two action values cannot be separated.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TieRule {
    FixedAlpha,
    /// Play α with the given probability, read off a partial oracle.
    OracleMediated {
        alpha: Rational,
    },
}

impl TieRule {
    /// Builds the randomized rule from a registry holding a single fair-coin
    /// witness: the answer distribution of the query `(1, ε, 1/2)` at `level`,
    /// renormalized over non-halting answers, is the probability of α.
    pub fn oracle_mediated(level: u32) -> Result<TieRule, RlError> {
        let mut reg = Registry::new();
        reg.register_source(library::FAIR_COIN).map_err(|e| RlError::TieOracle(e.to_string()))?;
        let trace = crate::search::search(&reg, level, u64::MAX).map_err(|e| RlError::TieOracle(e.to_string()))?;
        let po = trace.final_oracle().ok_or_else(|| RlError::TieOracle("no oracle emitted".into()))?;
        let (one, zero, _) = po.answer_distribution(1);
        let total = &one + &zero;
        if total.is_zero() {
            return Err(RlError::TieOracle("the oracle halts on the tie query".into()));
        }
        Ok(TieRule::OracleMediated { alpha: one / total })
    }

    pub fn dist(&self) -> ActionDist {
        match self {
            TieRule::FixedAlpha => ActionDist::deterministic(Action::Alpha),
            TieRule::OracleMediated { alpha } => ActionDist::new(alpha.clone()).expect("probability"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionDecision {
    pub dist: ActionDist,
    /// Action-value enclosures for α and β at the final depth.
    pub q: [ValueInterval; 2],
    pub depth: u32,
    /// The intervals were disjoint.
    pub separated: bool,
    /// The tie rule fired although the widths never dropped below ε.
    pub flagged: bool,
}

/// Lower (`lower = true`) or upper expectation of `values` over every
/// distribution inside the per-percept probability intervals.
pub fn credal_expectation(
    probs: &[ProbabilityInterval],
    values: &[Rational],
    lower: bool,
) -> Result<Rational, RlError> {
    if probs.iter().all(ProbabilityInterval::is_point) {
        return Ok(probs.iter().zip(values).map(|(p, v)| p.lo() * v).sum());
    }
    let lo_mass: Rational = probs.iter().map(|p| p.lo().clone()).sum();
    let hi_mass: Rational = probs.iter().map(|p| p.hi().clone()).sum();
    if lo_mass > Rational::one() || hi_mass < Rational::one() {
        return Err(RlError::InvalidConditional(format!(
            "interval masses [{}, {}] exclude 1",
            rational::show(&lo_mass),
            rational::show(&hi_mass)
        )));
    }
    let mut acc: Rational = probs.iter().zip(values).map(|(p, v)| p.lo() * v).sum();
    let mut free = Rational::one() - lo_mass;
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&i, &j| if lower { values[i].cmp(&values[j]) } else { values[j].cmp(&values[i]) });
    for i in order {
        if free.is_zero() {
            break;
        }
        let add = probs[i].width().min(free.clone());
        acc += &add * &values[i];
        free -= add;
    }
    Ok(acc)
}

/// Memo for optimal-value recursions over one environment and discount.
///
/// Keys carry the state, the time step (zero for stationary discounts) and the
/// remaining depth, so one cache can serve many decisions.
#[derive(Debug, Clone)]
pub struct PlanCache<S> {
    opt: HashMap<(S, u64, u32), (Rational, Rational)>,
}

impl<S> Default for PlanCache<S> {
    fn default() -> Self {
        PlanCache { opt: HashMap::new() }
    }
}

impl<S: Hash + Eq + Clone> PlanCache<S> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.opt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opt.is_empty()
    }

    pub fn clear(&mut self) {
        self.opt.clear();
    }
}

type PolicyMemo<S, P> = HashMap<(S, P, u64, u32), (Rational, Rational)>;

struct Ctx<'a, E: Environment + ?Sized> {
    env: &'a E,
    discount: &'a Discount,
    r_min: Rational,
    r_max: Rational,
}

impl<E: Environment + ?Sized> Ctx<'_, E> {
    fn key_time(&self, t: u64) -> u64 {
        if self.discount.is_stationary() {
            0
        } else {
            t
        }
    }

    /// Lower and upper enclosure of `E[w r + c V(next)]` for one action,
    /// given child enclosures per percept.
    fn backup<F>(&self, s: &E::State, t: u64, a: Action, mut child: F) -> Result<(Rational, Rational), RlError>
    where
        F: FnMut(E::State, Percept) -> Result<(Rational, Rational), RlError>,
    {
        let probs = self.env.conditional(s, a)?;
        let w = self.discount.step_weight(t);
        let c = self.discount.continuation(t);
        let space = self.env.percepts();
        let mut vlo = Vec::with_capacity(probs.len());
        let mut vhi = Vec::with_capacity(probs.len());
        for (ei, p) in probs.iter().enumerate() {
            if p.hi().is_zero() {
                vlo.push(Rational::zero());
                vhi.push(Rational::zero());
                continue;
            }
            let e = Percept(ei);
            let r = &w * space.reward(e);
            let (clo, chi) = if c.is_zero() {
                (Rational::zero(), Rational::zero())
            } else {
                child(self.env.transition(s, a, e)?, e)?
            };
            vlo.push(&r + &c * clo);
            vhi.push(r + &c * chi);
        }
        Ok((credal_expectation(&probs, &vlo, true)?, credal_expectation(&probs, &vhi, false)?))
    }

    fn leaf(&self, t: u64) -> (Rational, Rational) {
        if self.discount.tail(t).is_zero() {
            (Rational::zero(), Rational::zero())
        } else {
            (self.r_min.clone(), self.r_max.clone())
        }
    }

    fn opt(
        &self,
        cache: &mut PlanCache<E::State>,
        s: &E::State,
        t: u64,
        depth: u32,
    ) -> Result<(Rational, Rational), RlError> {
        if depth == 0 || self.discount.tail(t).is_zero() {
            return Ok(self.leaf(t));
        }
        let key = (s.clone(), self.key_time(t), depth);
        if let Some(v) = cache.opt.get(&key) {
            return Ok(v.clone());
        }
        let q = self.q_values(cache, s, t, depth)?;
        let v = (q[0].0.clone().max(q[1].0.clone()), q[0].1.clone().max(q[1].1.clone()));
        cache.opt.insert(key, v.clone());
        Ok(v)
    }

    fn q_values(
        &self,
        cache: &mut PlanCache<E::State>,
        s: &E::State,
        t: u64,
        depth: u32,
    ) -> Result<[(Rational, Rational); 2], RlError> {
        let qa = self.backup(s, t, Action::Alpha, |ns, _| self.opt(cache, &ns, t + 1, depth - 1))?;
        let qb = self.backup(s, t, Action::Beta, |ns, _| self.opt(cache, &ns, t + 1, depth - 1))?;
        Ok([qa, qb])
    }

    fn policy_value<P: Policy + ?Sized>(
        &self,
        policy: &P,
        memo: &mut PolicyMemo<E::State, P::State>,
        s: &E::State,
        ps: &P::State,
        t: u64,
        depth: u32,
    ) -> Result<(Rational, Rational), RlError> {
        if depth == 0 || self.discount.tail(t).is_zero() {
            return Ok(self.leaf(t));
        }
        let key = (s.clone(), ps.clone(), self.key_time(t), depth);
        if let Some(v) = memo.get(&key) {
            return Ok(v.clone());
        }
        let dist = policy.action_dist(ps)?;
        let mut lo = Rational::zero();
        let mut hi = Rational::zero();
        for a in Action::ALL {
            let pa = dist.prob(a);
            if pa.is_zero() {
                continue;
            }
            let (qlo, qhi) = self.backup(s, t, a, |ns, e| {
                let nps = policy.update(ps, a, e)?;
                self.policy_value(policy, memo, &ns, &nps, t + 1, depth - 1)
            })?;
            lo += &pa * qlo;
            hi += &pa * qhi;
        }
        memo.insert(key, (lo.clone(), hi.clone()));
        Ok((lo, hi))
    }

    fn report(&self, (lo, hi): (Rational, Rational), t: u64, depth: u32, eps: Option<&Rational>) -> ValueReport {
        let tail = self.discount.tail_ratio(t, depth as u64);
        let range_width = &tail * (&self.r_max - &self.r_min);
        let width = &hi - &lo;
        let env_width = rational::clamp0(&width - &range_width);
        let flagged = eps.is_some_and(|e| width > *e);
        ValueReport { interval: ValueInterval { lo, hi }, depth, tail, env_width, flagged }
    }
}

fn ctx<'a, E: Environment + ?Sized>(env: &'a E, discount: &'a Discount) -> Ctx<'a, E> {
    let space = env.percepts();
    Ctx { env, discount, r_min: space.r_min().clone(), r_max: space.r_max().clone() }
}

/// Depth used for precision `eps`: the smallest `m ≥ 1` whose tail ratio is at most `eps / 2`.
fn depth_for(discount: &Discount, t: u64, eps: &Rational) -> Result<u32, RlError> {
    if !eps.is_positive() {
        return Err(RlError::BadPrecision);
    }
    let m = effective_horizon(discount, t, &(eps / rational::int(2)))?;
    Ok(m.max(1) as u32)
}

/// Optimal value after `h` to precision `eps`.
pub fn optimal_value<E: Environment + ?Sized>(
    env: &E,
    discount: &Discount,
    h: &History,
    eps: &Rational,
) -> Result<ValueReport, RlError> {
    let s = state_after(env, h)?;
    optimal_value_from(env, discount, &s, h.time(), eps, &mut PlanCache::new())
}

pub fn optimal_value_from<E: Environment + ?Sized>(
    env: &E,
    discount: &Discount,
    s: &E::State,
    t: u64,
    eps: &Rational,
    cache: &mut PlanCache<E::State>,
) -> Result<ValueReport, RlError> {
    if discount.tail(t).is_zero() {
        return Ok(zero_report());
    }
    let m = depth_for(discount, t, eps)?;
    let c = ctx(env, discount);
    let v = c.opt(cache, s, t, m)?;
    Ok(c.report(v, t, m, Some(eps)))
}

/// Expectimax enclosure at a fixed depth `m`.
pub fn optimal_value_at_depth<E: Environment + ?Sized>(
    env: &E,
    discount: &Discount,
    h: &History,
    m: u32,
) -> Result<ValueReport, RlError> {
    let s = state_after(env, h)?;
    let c = ctx(env, discount);
    let v = c.opt(&mut PlanCache::new(), &s, h.time(), m)?;
    Ok(c.report(v, h.time(), m, None))
}

/// Value of `policy` after `h` to precision `eps`.
pub fn value<E: Environment + ?Sized, P: Policy + ?Sized>(
    policy: &P,
    env: &E,
    discount: &Discount,
    h: &History,
    eps: &Rational,
) -> Result<ValueReport, RlError> {
    let s = state_after(env, h)?;
    let ps = policy.state_after(h)?;
    value_from(policy, env, discount, &s, &ps, h.time(), eps)
}

pub fn value_from<E: Environment + ?Sized, P: Policy + ?Sized>(
    policy: &P,
    env: &E,
    discount: &Discount,
    s: &E::State,
    ps: &P::State,
    t: u64,
    eps: &Rational,
) -> Result<ValueReport, RlError> {
    if discount.tail(t).is_zero() {
        return Ok(zero_report());
    }
    let m = depth_for(discount, t, eps)?;
    let c = ctx(env, discount);
    let v = c.policy_value(policy, &mut HashMap::new(), s, ps, t, m)?;
    Ok(c.report(v, t, m, Some(eps)))
}

pub fn value_at_depth<E: Environment + ?Sized, P: Policy + ?Sized>(
    policy: &P,
    env: &E,
    discount: &Discount,
    h: &History,
    m: u32,
) -> Result<ValueReport, RlError> {
    let s = state_after(env, h)?;
    let ps = policy.state_after(h)?;
    let c = ctx(env, discount);
    let v = c.policy_value(policy, &mut HashMap::new(), &s, &ps, h.time(), m)?;
    Ok(c.report(v, h.time(), m, None))
}

fn zero_report() -> ValueReport {
    ValueReport {
        interval: ValueInterval::point(Rational::zero()),
        depth: 0,
        tail: Rational::zero(),
        env_width: Rational::zero(),
        flagged: false,
    }
}

pub fn optimal_action<E: Environment + ?Sized>(
    env: &E,
    discount: &Discount,
    h: &History,
    eps: &Rational,
    tie: &TieRule,
) -> Result<ActionDecision, RlError> {
    let s = state_after(env, h)?;
    optimal_action_from(env, discount, &s, h.time(), eps, tie, &mut PlanCache::new())
}

/// Deepens the action-value enclosures from depth 1 until they separate or
/// both are narrower than `eps`; the tie rule decides otherwise.
pub fn optimal_action_from<E: Environment + ?Sized>(
    env: &E,
    discount: &Discount,
    s: &E::State,
    t: u64,
    eps: &Rational,
    tie: &TieRule,
    cache: &mut PlanCache<E::State>,
) -> Result<ActionDecision, RlError> {
    if discount.tail(t).is_zero() {
        let z = ValueInterval::point(Rational::zero());
        return Ok(ActionDecision { dist: tie.dist(), q: [z.clone(), z], depth: 0, separated: false, flagged: false });
    }
    let max_depth = depth_for(discount, t, eps)?;
    let c = ctx(env, discount);
    let mut m = 1;
    loop {
        let [(alo, ahi), (blo, bhi)] = c.q_values(cache, s, t, m)?;
        let qa = ValueInterval { lo: alo, hi: ahi };
        let qb = ValueInterval { lo: blo, hi: bhi };
        let decided = if qa.lo > qb.hi {
            Some((ActionDist::deterministic(Action::Alpha), true, false))
        } else if qb.lo > qa.hi {
            Some((ActionDist::deterministic(Action::Beta), true, false))
        } else if qa.width() < *eps && qb.width() < *eps {
            Some((tie.dist(), false, false))
        } else if m >= max_depth {
            Some((tie.dist(), false, true))
        } else {
            None
        };
        if let Some((dist, separated, flagged)) = decided {
            return Ok(ActionDecision { dist, q: [qa, qb], depth: m, separated, flagged });
        }
        m += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::rl::{PerceptSpace, TabularEnv, TabularPolicy};

    fn half() -> Discount {
        Discount::geometric(rat(1, 2)).unwrap()
    }

    /// α always pays 1, β always pays 0.
    fn det_bandit() -> TabularEnv {
        TabularEnv::bandit(PerceptSpace::binary(), vec![rat(0, 1), rat(1, 1)], vec![rat(1, 1), rat(0, 1)]).unwrap()
    }

    #[test]
    fn reward_one_forever_is_exactly_one() {
        let space = PerceptSpace::from_rewards(&[(rat(1, 1), "1")]).unwrap();
        let env = TabularEnv::bandit(space, vec![rat(1, 1)], vec![rat(1, 1)]).unwrap();
        let pi = TabularPolicy::uniform(1);
        let v = value(&pi, &env, &half(), &History::new(), &rat(1, 100)).unwrap();
        assert_eq!(v.interval, ValueInterval::point(rat(1, 1)));
        let space0 = PerceptSpace::from_rewards(&[(rat(0, 1), "0")]).unwrap();
        let env0 = TabularEnv::bandit(space0, vec![rat(1, 1)], vec![rat(1, 1)]).unwrap();
        let v0 = optimal_value(&env0, &half(), &History::new(), &rat(1, 100)).unwrap();
        assert_eq!(v0.interval, ValueInterval::point(rat(0, 1)));
    }

    #[test]
    fn bandit_value_and_action() {
        let env = det_bandit();
        let v = optimal_value(&env, &half(), &History::new(), &rat(1, 64)).unwrap();
        // Optimal value is 1; the enclosure has the tail as its only slack.
        assert!(v.interval.contains(&rat(1, 1)));
        assert_eq!(v.interval.width(), v.tail);
        assert!(v.tail <= rat(1, 128));
        assert!(!v.flagged);
        let d = optimal_action(&env, &half(), &History::new(), &rat(1, 64), &TieRule::FixedAlpha).unwrap();
        assert_eq!(d.dist.as_deterministic(), Some(Action::Alpha));
        assert!(d.separated);
    }

    #[test]
    fn symmetric_environment_uses_tie_rule() {
        let env =
            TabularEnv::bandit(PerceptSpace::binary(), vec![rat(1, 2), rat(1, 2)], vec![rat(1, 2), rat(1, 2)]).unwrap();
        let d = optimal_action(&env, &half(), &History::new(), &rat(1, 10), &TieRule::FixedAlpha).unwrap();
        assert_eq!(d.dist, ActionDist::deterministic(Action::Alpha));
        assert!(!d.separated && !d.flagged);
        let tie = TieRule::OracleMediated { alpha: rat(1, 2) };
        let d = optimal_action(&env, &half(), &History::new(), &rat(1, 10), &tie).unwrap();
        assert_eq!(d.dist, ActionDist::uniform());
    }

    #[test]
    fn oracle_mediated_rule_is_a_fair_coin() {
        assert_eq!(TieRule::oracle_mediated(4).unwrap(), TieRule::OracleMediated { alpha: rat(1, 2) });
    }

    #[test]
    fn two_step_value_matches_trajectory_sum() {
        // Horizon-2 environment: reward 1 w.p. 3/4 after α, w.p. 1/4 after β, i.i.d.
        let env =
            TabularEnv::bandit(PerceptSpace::binary(), vec![rat(1, 4), rat(3, 4)], vec![rat(3, 4), rat(1, 4)]).unwrap();
        let pi = TabularPolicy::uniform(2);
        let d = Discount::FiniteHorizon(2);
        let v = value(&pi, &env, &d, &History::new(), &rat(1, 100)).unwrap();
        // Enumerate all 16 trajectories (a1 e1 a2 e2) by hand-rolled loops.
        let mut total = Rational::zero();
        for a1 in Action::ALL {
            for e1 in 0..2 {
                for a2 in Action::ALL {
                    for e2 in 0..2 {
                        let p = rat(1, 4) * env.prob(0, a1, Percept(e1)).clone() * env.prob(0, a2, Percept(e2)).clone();
                        total += p * rat((e1 + e2) as i64, 2);
                    }
                }
            }
        }
        assert_eq!(v.interval, ValueInterval::point(total.clone()));
        assert_eq!(total, rat(1, 2));
    }

    #[test]
    fn credal_expectation_extremes() {
        let p = [
            ProbabilityInterval::new(rat(1, 4), rat(1, 2)).unwrap(),
            ProbabilityInterval::new(rat(1, 4), rat(3, 4)).unwrap(),
        ];
        let v = [rat(0, 1), rat(1, 1)];
        assert_eq!(credal_expectation(&p, &v, true).unwrap(), rat(1, 2));
        assert_eq!(credal_expectation(&p, &v, false).unwrap(), rat(3, 4));
        let short = [ProbabilityInterval::point(rat(1, 4)), ProbabilityInterval::new(rat(0, 1), rat(1, 2)).unwrap()];
        assert!(credal_expectation(&short, &v, true).is_err());
    }

    #[test]
    fn zero_tail_gives_zero_value() {
        let env = det_bandit();
        let mut h = History::new();
        h.push(Action::Alpha, Percept(1));
        let v = optimal_value(&env, &Discount::FiniteHorizon(1), &h, &rat(1, 10)).unwrap();
        assert_eq!(v.interval, ValueInterval::point(rat(0, 1)));
    }
}
