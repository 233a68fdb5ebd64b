use num::One;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AnyPolicy, AnyPolicyState, GameError, TabularGame};
use crate::bayes::ThompsonActor;
use crate::rational::{sample_index, Rational};
use crate::rl::{Action, ActionDist, History, Percept, Policy, RlError};

/// An acting participant: a policy with its running state, or a sampling
/// Thompson agent.
#[derive(Debug)]
pub enum Agent {
    Policy { policy: AnyPolicy, state: AnyPolicyState },
    Thompson(Box<ThompsonActor>),
}

impl Agent {
    pub fn thompson(actor: ThompsonActor) -> Agent {
        Agent::Thompson(Box::new(actor))
    }

    pub fn from_policy(policy: impl Into<AnyPolicy>) -> Agent {
        let policy = policy.into();
        let state = policy.initial();
        Agent::Policy { policy, state }
    }

    pub fn next_dist(&mut self) -> Result<ActionDist, RlError> {
        match self {
            Agent::Policy { policy, state } => policy.action_dist(state),
            Agent::Thompson(t) => t.next_dist(),
        }
    }

    pub fn observe(&mut self, a: Action, e: Percept) -> Result<(), RlError> {
        match self {
            Agent::Policy { policy, state } => {
                *state = policy.update(state, a, e)?;
                Ok(())
            }
            Agent::Thompson(t) => t.observe(a, e),
        }
    }

    /// The agent's behavior as a function of its own history, with any
    /// internal sampling marginalized out.
    pub fn marginal_policy(&self) -> AnyPolicy {
        match self {
            Agent::Policy { policy, .. } => policy.clone(),
            Agent::Thompson(t) => AnyPolicy::Thompson(t.policy().clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointCycle {
    /// Game state in which the joint action was taken.
    pub state: usize,
    pub actions: Vec<Action>,
    pub percepts: Vec<Percept>,
    /// `π_i(a_i | own history)` for each agent.
    pub action_probs: Vec<Rational>,
    /// Probability of the realized outcome given state and joint action.
    pub outcome_prob: Rational,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JointHistory {
    pub cycles: Vec<JointCycle>,
}

impl JointHistory {
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    /// Agent `i`'s own view: its actions and percepts only.
    pub fn projection(&self, i: usize) -> History {
        History { cycles: self.cycles.iter().map(|c| (c.actions[i], c.percepts[i])).collect() }
    }

    pub fn rewards(&self, game: &TabularGame, i: usize) -> Vec<Rational> {
        self.cycles.iter().map(|c| game.space(i).reward(c.percepts[i]).clone()).collect()
    }

    pub fn average_reward(&self, game: &TabularGame, i: usize) -> Rational {
        let r = self.rewards(game, i);
        if r.is_empty() {
            return Rational::default();
        }
        let n = Rational::from_integer((r.len() as i64).into());
        r.into_iter().sum::<Rational>() / n
    }

    /// Probability of the whole joint history under the recorded factors.
    pub fn probability(&self) -> Rational {
        self.cycles
            .iter()
            .map(|c| c.action_probs.iter().fold(c.outcome_prob.clone(), |acc, p| acc * p))
            .fold(Rational::one(), |acc, p| acc * p)
    }
}

/// Samples `steps` cycles of joint play.
///
/// Agents choose in index order from one seeded generator, then the joint
/// outcome is drawn from the same generator.
pub fn play(game: &TabularGame, agents: &mut [Agent], steps: usize, seed: u64) -> Result<JointHistory, GameError> {
    play_with(game, agents, steps, seed, |_, _| Ok(()))
}

/// As [`play`], calling `on_step` after every completed cycle.
pub fn play_with<F>(
    game: &TabularGame,
    agents: &mut [Agent],
    steps: usize,
    seed: u64,
    mut on_step: F,
) -> Result<JointHistory, GameError>
where
    F: FnMut(&JointHistory, &[Agent]) -> Result<(), GameError>,
{
    let n = game.agents();
    if agents.len() != n {
        return Err(GameError::PolicyCount { expected: n, got: agents.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hist = JointHistory::default();
    let mut state = game.initial();
    for _ in 0..steps {
        let mut actions = Vec::with_capacity(n);
        let mut probs = Vec::with_capacity(n);
        for ag in agents.iter_mut() {
            let d = ag.next_dist()?;
            let a = d.sample(&mut rng);
            probs.push(d.prob(a));
            actions.push(a);
        }
        let outs = game.outcomes(state, &actions);
        let weights: Vec<Rational> = outs.iter().map(|o| o.prob.clone()).collect();
        let k = sample_index(&weights, &mut rng).ok_or_else(|| GameError::InvalidGame("no outcome".into()))?;
        let o = &outs[k];
        for (i, ag) in agents.iter_mut().enumerate() {
            ag.observe(actions[i], o.percepts[i])?;
        }
        hist.cycles.push(JointCycle {
            state,
            actions,
            percepts: o.percepts.clone(),
            action_probs: probs,
            outcome_prob: o.prob.clone(),
        });
        state = o.next;
        on_step(&hist, agents)?;
    }
    Ok(hist)
}
