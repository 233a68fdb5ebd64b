//! Seeded end-to-end runs shared by the command-line tool and the
//! acceptance suite.

use std::rc::Rc;
use std::sync::Arc;

use num::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bayes::{
    dogmatic_class, BayesPolicy, BayesState, ClassMember, EnvironmentClass, ThompsonActor, ThompsonPolicy,
};
use crate::multiagent::{
    gap_from, gap_in_env, induced_env, make_iterated_pd, make_matching_pennies, pd_grim_policy, play, play_with, Agent,
    AnyPolicy, AnyPolicyState, CompletedPolicy, GameError, JointBelief, JointHistory, SubjectiveEnv, TabularGame,
};
use crate::rational::{rat, Rational};
use crate::rl::{
    value_from, Action, ActionDist, Discount, Environment, PerceptSpace, Policy, TabularEnv, TabularPolicy, TieRule,
    ValueInterval,
};

fn geometric(gamma: &Rational) -> Result<Discount, GameError> {
    Ok(Discount::geometric(gamma.clone())?)
}

/// Opponent models for matching pennies: always α, always β, alternating
/// from α, and uniformly random.
pub fn pennies_opponent_models() -> Vec<(&'static str, TabularPolicy)> {
    use Action::{Alpha, Beta};
    vec![
        ("always-a", TabularPolicy::constant(Alpha, 2)),
        ("always-b", TabularPolicy::constant(Beta, 2)),
        ("alternate", TabularPolicy::cyclic(&[Alpha, Beta], 2).expect("nonempty")),
        ("uniform", TabularPolicy::uniform(2)),
    ]
}

/// Class of the environments agent `i` faces against each opponent model.
pub fn opponent_class(
    game: &TabularGame,
    i: usize,
    models: &[(&str, TabularPolicy)],
) -> Result<EnvironmentClass, GameError> {
    let members = models
        .iter()
        .map(|(name, p)| Ok(ClassMember::new(*name, induced_env(game, i, std::slice::from_ref(p))?, None)))
        .collect::<Result<Vec<_>, GameError>>()?;
    Ok(EnvironmentClass::new(members)?)
}

fn uniform_prior(n: usize) -> Vec<Rational> {
    vec![rat(1, n as i64); n]
}

fn agent_state(a: &Agent) -> Option<&AnyPolicyState> {
    match a {
        Agent::Policy { state, .. } => Some(state),
        Agent::Thompson(_) => None,
    }
}

/// Average rewards of `(ααβ)^∞` against `α^∞` in matching pennies.
pub fn fixed_pennies(steps: usize, seed: u64) -> Result<(JointHistory, [Rational; 2]), GameError> {
    let g = make_matching_pennies();
    let p1 = TabularPolicy::cyclic(&[Action::Alpha, Action::Alpha, Action::Beta], 2)?;
    let p2 = TabularPolicy::constant(Action::Alpha, 2);
    let mut agents = [Agent::from_policy(p1), Agent::from_policy(p2)];
    let h = play(&g, &mut agents, steps, seed)?;
    let avg = [h.average_reward(&g, 0), h.average_reward(&g, 1)];
    Ok((h, avg))
}

/// Parameters of the posterior-concentration run.
#[derive(Debug, Clone)]
pub struct ConcentrationConfig {
    pub steps: usize,
    pub gamma: Rational,
    /// Precision of the two on-policy values compared at the end.
    pub eps: Rational,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        ConcentrationConfig { steps: 200, gamma: rat(1, 2), eps: rat(1, 50) }
    }
}

#[derive(Debug, Clone)]
pub struct ConcentrationOutcome {
    pub posterior_truth: Rational,
    /// Enclosure of `V^π_μ - V^π_ξ` after the run.
    pub value_gap: ValueInterval,
}

impl ConcentrationOutcome {
    /// Largest absolute value inside the gap enclosure.
    pub fn gap_bound(&self) -> Rational {
        self.value_gap.lo.abs().max(self.value_gap.hi.abs())
    }
}

/// Three Bernoulli bandits with the first one true, observed under the
/// uniformly random policy.
pub fn concentration_class() -> Result<(EnvironmentClass, usize), GameError> {
    let specs = [(rat(3, 4), rat(1, 4)), (rat(1, 4), rat(3, 4)), (rat(1, 2), rat(1, 2))];
    let members = specs
        .iter()
        .enumerate()
        .map(|(k, (pa, pb))| {
            let dist = |p: &Rational| vec![Rational::one() - p, p.clone()];
            let env = TabularEnv::bandit(PerceptSpace::binary(), dist(pa), dist(pb))?;
            Ok(ClassMember::new(format!("bandit-{k}"), env, None))
        })
        .collect::<Result<Vec<_>, GameError>>()?;
    Ok((EnvironmentClass::new(members)?, 0))
}

pub fn concentration_run(cfg: &ConcentrationConfig, seed: u64) -> Result<ConcentrationOutcome, GameError> {
    let (class, truth) = concentration_class()?;
    let class = Arc::new(class);
    let mu = class.member(truth).env.clone();
    let mut state = BayesState::new(class.clone(), &uniform_prior(class.len()))?;
    let pi = TabularPolicy::uniform(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s_mu = mu.initial();
    for _ in 0..cfg.steps {
        let a = ActionDist::uniform().sample(&mut rng);
        let probs: Vec<Rational> = mu.conditional(&s_mu, a)?.iter().map(|p| p.lo().clone()).collect();
        let e = crate::rl::Percept(crate::rational::sample_index(&probs, &mut rng).expect("distribution"));
        s_mu = mu.transition(&s_mu, a, e)?;
        state.update(a, e)?;
    }
    let disc = geometric(&cfg.gamma)?;
    let t = state.history().time();
    let ps = pi.initial();
    let v_mu = value_from(&pi, &mu, &disc, &s_mu, &ps, t, &cfg.eps)?;
    let v_xi = value_from(&pi, state.mixture(), &disc, state.belief(), &ps, t, &cfg.eps)?;
    Ok(ConcentrationOutcome {
        posterior_truth: state.posterior()[truth].clone(),
        value_gap: v_mu.interval.minus(&v_xi.interval),
    })
}

/// Parameters of the dogmatic matching-pennies run.
#[derive(Debug, Clone)]
pub struct DogmaticConfig {
    pub steps: usize,
    pub gamma: Rational,
    /// Prior mass moved onto the hell-grafted copies.
    pub lambda: Rational,
    /// Planning precision of both agents.
    pub eps_plan: Rational,
    /// Precision of the values entering the gap bound.
    pub eps_gap: Rational,
    /// Measure the gaps after every `check_every` cycles.
    pub check_every: usize,
}

impl Default for DogmaticConfig {
    fn default() -> Self {
        DogmaticConfig {
            steps: 500,
            gamma: rat(4, 5),
            lambda: rat(9, 10),
            eps_plan: rat(1, 100),
            eps_gap: rat(1, 100),
            check_every: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DogmaticOutcome {
    pub history: JointHistory,
    /// Every action matched the agent's reference policy.
    pub followed_reference: [bool; 2],
    /// Smallest certified lower bound on each agent's best-response gap over the checks.
    pub min_gap_lower: [Rational; 2],
    pub checks: usize,
}

/// Deterministic opponents used by the dogmatic agents.
pub fn dogmatic_opponent_models() -> Vec<(&'static str, TabularPolicy)> {
    use Action::{Alpha, Beta};
    vec![
        ("always-a", TabularPolicy::constant(Alpha, 2)),
        ("always-b", TabularPolicy::constant(Beta, 2)),
        ("alternate", TabularPolicy::cyclic(&[Alpha, Beta], 2).expect("nonempty")),
        ("aab", TabularPolicy::cyclic(&[Alpha, Alpha, Beta], 2).expect("nonempty")),
    ]
}

/// The two reference policies: `(ααβ)^∞` for agent 1 and `α^∞` for agent 2.
pub fn dogmatic_references() -> [TabularPolicy; 2] {
    [
        TabularPolicy::cyclic(&[Action::Alpha, Action::Alpha, Action::Beta], 2).expect("nonempty"),
        TabularPolicy::constant(Action::Alpha, 2),
    ]
}

/// Builds agent `i`'s dogmatic Bayes policy.
pub fn dogmatic_agent(game: &TabularGame, i: usize, cfg: &DogmaticConfig) -> Result<BayesPolicy, GameError> {
    let models = dogmatic_opponent_models();
    let base = opponent_class(game, i, &models)?;
    let reference = &dogmatic_references()[i];
    let (class, weights) = dogmatic_class(&base, &uniform_prior(base.len()), reference, &cfg.lambda)?;
    let state = BayesState::new(Arc::new(class), &weights)?;
    Ok(BayesPolicy::new(&state, geometric(&cfg.gamma)?, cfg.eps_plan.clone(), TieRule::FixedAlpha)?)
}

/// Runs two dogmatic Bayes agents against each other.
///
/// A Bayes agent over a class of deterministic opponents has no posterior
/// once the co-player leaves every member's support; there each agent is
/// completed by its reference policy.
///
/// Gaps are measured in each agent's subjective environment, the co-player
/// being the other completed Bayes agent itself.
pub fn dogmatic_run(cfg: &DogmaticConfig) -> Result<DogmaticOutcome, GameError> {
    let g = make_matching_pennies();
    let policies: Vec<AnyPolicy> = (0..2)
        .map(|i| {
            let bayes = dogmatic_agent(&g, i, cfg)?;
            let fallback = dogmatic_references()[i].clone();
            Ok::<_, GameError>(AnyPolicy::Completed(Rc::new(CompletedPolicy {
                primary: AnyPolicy::Bayes(Rc::new(bayes)),
                fallback,
            })))
        })
        .collect::<Result<_, _>>()?;
    let disc = geometric(&cfg.gamma)?;
    let envs: Vec<SubjectiveEnv> =
        (0..2).map(|i| crate::multiagent::subjective_env(&g, &policies, i)).collect::<Result<_, _>>()?;
    let mut beliefs: Vec<JointBelief> = envs.iter().map(|e| e.initial()).collect();
    let references = dogmatic_references();
    let mut ref_states = [references[0].initial(), references[1].initial()];
    let mut followed = [true, true];
    let mut min_gap: [Option<Rational>; 2] = [None, None];
    let mut checks = 0;
    let mut agents: Vec<Agent> =
        policies.iter().map(|p| Agent::Policy { policy: p.clone(), state: p.initial() }).collect();
    let history = play_with(&g, &mut agents, cfg.steps, 0, |h, agents| {
        let c = h.cycles.last().expect("one cycle");
        for i in 0..2 {
            let expected = references[i].dist(ref_states[i]).as_deterministic();
            if expected != Some(c.actions[i]) {
                followed[i] = false;
            }
            ref_states[i] = references[i].update(&ref_states[i], c.actions[i], c.percepts[i])?;
            beliefs[i] = envs[i].transition(&beliefs[i], c.actions[i], c.percepts[i])?;
        }
        if h.len() % cfg.check_every != 0 {
            return Ok(());
        }
        checks += 1;
        let t_next = h.len() as u64 + 1;
        for i in 0..2 {
            let own = agent_state(&agents[i]).expect("policy agent");
            let r = gap_from(&envs[i], &policies[i], &disc, &beliefs[i], own, t_next, &cfg.eps_gap)?;
            if min_gap[i].as_ref().is_none_or(|m| r.gap.lo < *m) {
                min_gap[i] = Some(r.gap.lo);
            }
        }
        Ok(())
    })?;
    let min_gap_lower = min_gap.map(|m| m.unwrap_or_else(Rational::zero));
    Ok(DogmaticOutcome { history, followed_reference: followed, min_gap_lower, checks })
}

/// Parameters of the Thompson-versus-Thompson run.
#[derive(Debug, Clone)]
pub struct ThompsonConfig {
    pub steps: usize,
    pub gamma: Rational,
    /// ε of the best-response test.
    pub eps: Rational,
    /// Planning precision of the sampled members' policies.
    pub eps_plan: Rational,
    /// Resampling precision: commitments last one effective horizon for it.
    pub eps_resample: Rational,
    /// Search level of the oracle behind the tie rule.
    pub tie_level: u32,
}

impl Default for ThompsonConfig {
    fn default() -> Self {
        ThompsonConfig {
            steps: 1000,
            gamma: rat(1, 2),
            eps: rat(1, 10),
            eps_plan: rat(1, 100),
            eps_resample: rat(1, 10),
            tie_level: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ThompsonOutcome {
    pub history: JointHistory,
    pub gaps: [ValueInterval; 2],
    pub best_response: [bool; 2],
    /// Posterior of each agent over the opponent models at the end.
    pub posteriors: [Vec<Rational>; 2],
}

pub fn thompson_run(cfg: &ThompsonConfig, seed: u64) -> Result<ThompsonOutcome, GameError> {
    let g = make_matching_pennies();
    let models = pennies_opponent_models();
    let tie = TieRule::oracle_mediated(cfg.tie_level)?;
    let disc = geometric(&cfg.gamma)?;
    let mut marginals = Vec::new();
    let mut agents = Vec::new();
    for i in 0..2 {
        let class = Arc::new(opponent_class(&g, i, &models)?);
        let state = BayesState::new(class.clone(), &uniform_prior(class.len()))?;
        let p = Rc::new(ThompsonPolicy::new(
            &state,
            disc.clone(),
            cfg.eps_plan.clone(),
            cfg.eps_resample.clone(),
            tie.clone(),
        )?);
        let actor_seed = seed.wrapping_mul(2).wrapping_add(i as u64 + 1);
        agents.push(Agent::thompson(ThompsonActor::new(p.clone(), actor_seed)));
        marginals.push(AnyPolicy::Thompson(p));
    }
    let history = play(&g, &mut agents, cfg.steps, seed)?;
    let mut gaps = Vec::new();
    let mut best = [false, false];
    let mut posteriors = Vec::new();
    for i in 0..2 {
        let env = crate::multiagent::subjective_env(&g, &marginals, i)?;
        let r = gap_in_env(&env, &marginals[i], &disc, &history.projection(i), &cfg.eps)?;
        best[i] = r.is_best_response(&cfg.eps);
        gaps.push(r.gap);
        if let Agent::Thompson(a) = &agents[i] {
            posteriors.push(a.belief().weights.clone());
        }
    }
    let gaps = [gaps[0].clone(), gaps[1].clone()];
    let posteriors = [posteriors[0].clone(), posteriors[1].clone()];
    Ok(ThompsonOutcome { history, gaps, best_response: best, posteriors })
}

/// Parameters of the prisoner's-dilemma run.
#[derive(Debug, Clone)]
pub struct PdConfig {
    pub steps: usize,
    /// Largest finite deadline in the opponent class.
    pub max_deadline: u64,
    pub gamma: Rational,
    pub eps_plan: Rational,
}

impl Default for PdConfig {
    fn default() -> Self {
        PdConfig { steps: 300, max_deadline: 15, gamma: rat(1, 2), eps_plan: rat(1, 100) }
    }
}

/// How a prisoner's-dilemma run ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdPattern {
    AllCooperate,
    /// Both defect at every step from `t0` on (1-based).
    DefectForever {
        t0: usize,
    },
    Other,
}

impl std::fmt::Display for PdPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PdPattern::AllCooperate => write!(f, "all-cooperate"),
            PdPattern::DefectForever { t0 } => write!(f, "defect-from-{t0}"),
            PdPattern::Other => write!(f, "other"),
        }
    }
}

pub fn classify_pd(h: &JointHistory) -> PdPattern {
    let both = |a: Action| move |c: &&crate::multiagent::JointCycle| c.actions.iter().all(|x| *x == a);
    if h.cycles.iter().all(|c| both(Action::Alpha)(&c)) {
        return PdPattern::AllCooperate;
    }
    let tail = h.cycles.iter().rev().take_while(both(Action::Beta)).count();
    if tail == 0 {
        PdPattern::Other
    } else {
        PdPattern::DefectForever { t0: h.len() - tail + 1 }
    }
}

#[derive(Debug, Clone)]
pub struct PdOutcome {
    pub history: JointHistory,
    pub pattern: PdPattern,
    pub priors: [Vec<Rational>; 2],
}

/// Grim-trigger opponents with deadlines `0..=max_deadline` and without one.
pub fn pd_models(max_deadline: u64) -> Vec<(String, TabularPolicy)> {
    let mut v: Vec<(String, TabularPolicy)> =
        (0..=max_deadline).map(|t| (format!("grim-{t}"), pd_grim_policy(Some(t)))).collect();
    v.push(("grim-inf".into(), pd_grim_policy(None)));
    v
}

fn random_prior(n: usize, rng: &mut ChaCha8Rng) -> Vec<Rational> {
    let raw: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=100)).collect();
    let total: i64 = raw.iter().sum();
    raw.into_iter().map(|x| rat(x, total)).collect()
}

pub fn pd_run(cfg: &PdConfig, seed: u64) -> Result<PdOutcome, GameError> {
    let g = make_iterated_pd();
    let models = pd_models(cfg.max_deadline);
    let named: Vec<(&str, TabularPolicy)> = models.iter().map(|(n, p)| (n.as_str(), p.clone())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let disc = geometric(&cfg.gamma)?;
    let mut agents = Vec::new();
    let mut priors = Vec::new();
    for i in 0..2 {
        let class = Arc::new(opponent_class(&g, i, &named)?);
        let prior = random_prior(class.len(), &mut rng);
        let state = BayesState::new(class, &prior)?;
        let p = BayesPolicy::new(&state, disc.clone(), cfg.eps_plan.clone(), TieRule::FixedAlpha)?;
        agents.push(Agent::from_policy(AnyPolicy::Bayes(Rc::new(p))));
        priors.push(prior);
    }
    let history = play(&g, &mut agents, cfg.steps, seed)?;
    let pattern = classify_pd(&history);
    let priors = [priors[0].clone(), priors[1].clone()];
    Ok(PdOutcome { history, pattern, priors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_pennies_averages() {
        let (_, avg) = fixed_pennies(300, 0).unwrap();
        assert_eq!(avg, [rat(2, 3), rat(1, 3)]);
    }

    #[test]
    fn pd_patterns() {
        use crate::multiagent::JointCycle;
        use Action::{Alpha as C, Beta as D};
        let mk = |acts: &[(Action, Action)]| JointHistory {
            cycles: acts
                .iter()
                .map(|&(a, b)| JointCycle {
                    state: 0,
                    actions: vec![a, b],
                    percepts: vec![],
                    action_probs: vec![],
                    outcome_prob: Rational::one(),
                })
                .collect(),
        };
        assert_eq!(classify_pd(&mk(&[(C, C), (C, C)])), PdPattern::AllCooperate);
        assert_eq!(classify_pd(&mk(&[(C, C), (D, C), (D, D)])), PdPattern::DefectForever { t0: 3 });
        assert_eq!(classify_pd(&mk(&[(D, D), (D, D)])), PdPattern::DefectForever { t0: 1 });
        assert_eq!(classify_pd(&mk(&[(C, C), (D, D), (C, D)])), PdPattern::Other);
    }

    #[test]
    fn short_pd_run_is_classified() {
        let cfg = PdConfig { steps: 30, ..PdConfig::default() };
        let r = pd_run(&cfg, 3).unwrap();
        assert_ne!(r.pattern, PdPattern::Other);
    }
}
