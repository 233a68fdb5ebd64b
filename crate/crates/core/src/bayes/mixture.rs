use std::sync::Arc;

use num::{One, Zero};

use super::{normalize, BayesError, EnvironmentClass};
use crate::oracle::ProbabilityInterval;
use crate::rational::Rational;
use crate::rl::{Action, AnyState, Environment, History, Percept, PerceptSpace, RlError};

/// Normalized posterior together with every member's own state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Belief {
    pub weights: Vec<Rational>,
    pub states: Vec<AnyState>,
}

/// The Bayes mixture as an environment whose state is the belief.
///
/// Member likelihoods are midpoints of their conditional intervals, which
/// is exact for tabular members.
#[derive(Debug, Clone)]
pub struct MixtureEnv {
    class: Arc<EnvironmentClass>,
    prior: Vec<Rational>,
}

impl MixtureEnv {
    pub fn new(class: Arc<EnvironmentClass>, prior: &[Rational]) -> Result<Self, BayesError> {
        if prior.len() != class.len() {
            return Err(BayesError::BadPrior);
        }
        Ok(MixtureEnv { prior: normalize(prior)?, class })
    }

    pub fn class(&self) -> &Arc<EnvironmentClass> {
        &self.class
    }

    /// Normalized prior.
    pub fn prior(&self) -> &[Rational] {
        &self.prior
    }

    /// Posterior-weighted member conditionals for action `a`.
    pub fn member_conditionals(&self, b: &Belief, a: Action) -> Result<Vec<Option<Vec<ProbabilityInterval>>>, RlError> {
        self.class
            .members()
            .iter()
            .zip(&b.weights)
            .zip(&b.states)
            .map(|((m, w), s)| if w.is_zero() { Ok(None) } else { m.env.conditional(s, a).map(Some) })
            .collect()
    }

    /// Next belief and the posterior-weighted width of the observed percept's
    /// likelihood interval.
    pub fn step(&self, b: &Belief, a: Action, e: Percept) -> Result<(Belief, Rational), RlError> {
        let conds = self.member_conditionals(b, a)?;
        let mut weights = Vec::with_capacity(b.weights.len());
        let mut width = Rational::zero();
        for (w, c) in b.weights.iter().zip(&conds) {
            match c {
                None => weights.push(Rational::zero()),
                Some(c) => {
                    let iv = c.get(e.0).ok_or(RlError::BadPercept(e.0))?;
                    width += w * iv.width();
                    weights.push(w * iv.midpoint());
                }
            }
        }
        let total: Rational = weights.iter().cloned().sum();
        if total.is_zero() {
            return Err(RlError::PosteriorUndefined);
        }
        if !total.is_one() {
            for w in &mut weights {
                *w /= &total;
            }
        }
        let states = self
            .class
            .members()
            .iter()
            .zip(&b.states)
            .map(|(m, s)| m.env.transition(s, a, e))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((Belief { weights, states }, width))
    }
}

impl Environment for MixtureEnv {
    type State = Belief;

    fn percepts(&self) -> &PerceptSpace {
        self.class.percepts()
    }

    fn initial(&self) -> Belief {
        Belief { weights: self.prior.clone(), states: self.class.members().iter().map(|m| m.env.initial()).collect() }
    }

    fn conditional(&self, b: &Belief, a: Action) -> Result<Vec<ProbabilityInterval>, RlError> {
        let n = self.percepts().len();
        let mut lo = vec![Rational::zero(); n];
        let mut hi = vec![Rational::zero(); n];
        for (w, c) in b.weights.iter().zip(self.member_conditionals(b, a)?) {
            if let Some(c) = c {
                for (e, iv) in c.iter().enumerate() {
                    lo[e] += w * iv.lo();
                    hi[e] += w * iv.hi();
                }
            }
        }
        Ok(lo
            .into_iter()
            .zip(hi)
            .map(|(l, h)| ProbabilityInterval::new(l, h.min(Rational::one())).expect("convex combination"))
            .collect())
    }

    fn transition(&self, b: &Belief, a: Action, e: Percept) -> Result<Belief, RlError> {
        Ok(self.step(b, a, e)?.0)
    }
}

/// A Bayes agent's bookkeeping: mixture, history, belief and width log.
#[derive(Debug, Clone)]
pub struct BayesState {
    mixture: MixtureEnv,
    history: History,
    belief: Belief,
    widths: Vec<Rational>,
}

impl BayesState {
    pub fn new(class: Arc<EnvironmentClass>, prior: &[Rational]) -> Result<Self, BayesError> {
        let mixture = MixtureEnv::new(class, prior)?;
        let belief = mixture.initial();
        Ok(BayesState { mixture, history: History::new(), belief, widths: Vec::new() })
    }

    pub fn mixture(&self) -> &MixtureEnv {
        &self.mixture
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn belief(&self) -> &Belief {
        &self.belief
    }

    pub fn posterior(&self) -> &[Rational] {
        &self.belief.weights
    }

    /// Per-step likelihood-interval widths (zero for exact classes).
    pub fn widths(&self) -> &[Rational] {
        &self.widths
    }

    pub fn cumulative_width(&self) -> Rational {
        self.widths.iter().cloned().sum()
    }

    pub fn update(&mut self, a: Action, e: Percept) -> Result<(), BayesError> {
        let (b, w) = self.mixture.step(&self.belief, a, e)?;
        self.belief = b;
        self.widths.push(w);
        self.history.push(a, e);
        Ok(())
    }
}

/// Functional form of [`BayesState::update`].
pub fn posterior_update(state: &BayesState, a: Action, e: Percept) -> Result<BayesState, BayesError> {
    let mut s = state.clone();
    s.update(a, e)?;
    Ok(s)
}

/// `ξ(e | history, a)` under the current posterior.
pub fn mixture_conditional(state: &BayesState, a: Action, e: Percept) -> Result<ProbabilityInterval, BayesError> {
    let c = state.mixture.conditional(&state.belief, a)?;
    Ok(c.get(e.0).cloned().ok_or(RlError::BadPercept(e.0))?)
}
