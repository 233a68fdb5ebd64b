//! Single-agent reinforcement learning with exact values: histories,
//! discounting, environments, policies and interval-valued expectimax.

mod discount;
mod env;
mod policy;
mod value;

use std::fmt;

pub use discount::{effective_horizon, Discount};
pub use env::{env_from_machine, state_after, AnyEnv, AnyState, Environment, HellEnv, MachineEnv, TabularEnv};
pub use policy::{ActionDist, Policy, TabularPolicy};
pub use value::{
    credal_expectation, optimal_action, optimal_action_from, optimal_value, optimal_value_at_depth, optimal_value_from,
    value, value_at_depth, value_from, ActionDecision, PlanCache, TieRule, ValueInterval, ValueReport,
};

use crate::machine::{Bits, MachineError};
use crate::rational::Rational;
use num::{One, Zero};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RlError {
    #[error("reward {0} is outside [0, 1]")]
    RewardOutOfRange(String),
    #[error("percept codes must be distinct, nonempty and of equal length: {0}")]
    EncodingCollision(String),
    #[error("percept index {0} is out of range")]
    BadPercept(usize),
    #[error("conditional distribution is invalid: {0}")]
    InvalidConditional(String),
    #[error("policy distribution is invalid: {0}")]
    InvalidPolicy(String),
    #[error("effective horizon undefined: the discount tail is zero at t = {0}")]
    ZeroTail(u64),
    #[error("precision must be positive")]
    BadPrecision,
    #[error("invalid discount: {0}")]
    BadDiscount(String),
    #[error("environment file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("the reference policy and environment disagree on percept count")]
    Mismatch,
    #[error("every environment assigns zero likelihood to the observed percept")]
    PosteriorUndefined,
    #[error("tie-rule oracle construction failed: {0}")]
    TieOracle(String),
    #[error(transparent)]
    Machine(#[from] MachineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Alpha,
    Beta,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Alpha, Action::Beta];

    pub fn index(self) -> usize {
        match self {
            Action::Alpha => 0,
            Action::Beta => 1,
        }
    }

    pub fn from_index(i: usize) -> Action {
        if i == 0 {
            Action::Alpha
        } else {
            Action::Beta
        }
    }

    /// Encoding bit: α is 0, β is 1.
    pub fn bit(self) -> bool {
        self == Action::Beta
    }

    pub fn other(self) -> Action {
        match self {
            Action::Alpha => Action::Beta,
            Action::Beta => Action::Alpha,
        }
    }

    /// ASCII letter used in files: `a` or `b`.
    pub fn letter(self) -> char {
        match self {
            Action::Alpha => 'a',
            Action::Beta => 'b',
        }
    }

    pub fn parse(s: &str) -> Option<Action> {
        match s {
            "a" | "A" | "α" | "alpha" => Some(Action::Alpha),
            "b" | "B" | "β" | "beta" => Some(Action::Beta),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Alpha => "α",
            Action::Beta => "β",
        })
    }
}

/// Index into a [`PerceptSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Percept(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PerceptDef {
    pub observation: String,
    pub reward: Rational,
    pub code: Bits,
}

/// Finite percept set with rewards in [0, 1] and fixed-length binary codes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PerceptSpace {
    defs: Vec<PerceptDef>,
    r_min: Rational,
    r_max: Rational,
}

impl PerceptSpace {
    pub fn new(defs: Vec<PerceptDef>) -> Result<Self, RlError> {
        if defs.is_empty() {
            return Err(RlError::EncodingCollision("empty percept space".into()));
        }
        for d in &defs {
            if d.reward < Rational::zero() || d.reward > Rational::one() {
                return Err(RlError::RewardOutOfRange(crate::rational::show(&d.reward)));
            }
        }
        let len = defs[0].code.len();
        for (i, d) in defs.iter().enumerate() {
            if d.code.len() != len || (len == 0 && defs.len() > 1) {
                return Err(RlError::EncodingCollision(format!("code of percept {i} has the wrong length")));
            }
            if defs[..i].iter().any(|o| o.code == d.code) {
                return Err(RlError::EncodingCollision(format!("code {} is used twice", d.code)));
            }
        }
        let r_min = defs.iter().map(|d| d.reward.clone()).min().unwrap();
        let r_max = defs.iter().map(|d| d.reward.clone()).max().unwrap();
        Ok(PerceptSpace { defs, r_min, r_max })
    }

    /// Observation-free rewards given as `(reward, code)` pairs.
    pub fn from_rewards(items: &[(Rational, &str)]) -> Result<Self, RlError> {
        let defs = items
            .iter()
            .map(|(r, c)| {
                Ok(PerceptDef {
                    observation: "-".into(),
                    reward: r.clone(),
                    code: c.parse().map_err(|_| RlError::EncodingCollision(c.to_string()))?,
                })
            })
            .collect::<Result<Vec<_>, RlError>>()?;
        Self::new(defs)
    }

    /// Two percepts: reward 0 coded `0` and reward 1 coded `1`.
    pub fn binary() -> Self {
        Self::from_rewards(&[(Rational::zero(), "0"), (Rational::one(), "1")]).unwrap()
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn defs(&self) -> &[PerceptDef] {
        &self.defs
    }

    pub fn get(&self, e: Percept) -> Result<&PerceptDef, RlError> {
        self.defs.get(e.0).ok_or(RlError::BadPercept(e.0))
    }

    pub fn reward(&self, e: Percept) -> &Rational {
        &self.defs[e.0].reward
    }

    pub fn code_len(&self) -> usize {
        self.defs[0].code.len()
    }

    pub fn r_min(&self) -> &Rational {
        &self.r_min
    }

    pub fn r_max(&self) -> &Rational {
        &self.r_max
    }

    pub fn percepts(&self) -> impl Iterator<Item = Percept> {
        (0..self.defs.len()).map(Percept)
    }

    pub fn by_name(&self, name: &str) -> Option<Percept> {
        self.defs.iter().position(|d| d.observation == name).map(Percept)
    }

    /// First percept with the smallest reward.
    pub fn worst(&self) -> Percept {
        Percept(self.defs.iter().position(|d| d.reward == self.r_min).unwrap())
    }
}

/// Completed interaction cycles `a_1 e_1 ... a_{t-1} e_{t-1}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct History {
    pub cycles: Vec<(Action, Percept)>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    /// Current time step (1-based): the next action is `a_t`.
    pub fn time(&self) -> u64 {
        self.cycles.len() as u64 + 1
    }

    pub fn push(&mut self, a: Action, e: Percept) {
        self.cycles.push((a, e));
    }

    pub fn with(&self, a: Action, e: Percept) -> History {
        let mut h = self.clone();
        h.push(a, e);
        h
    }

    /// Action bit followed by the percept code, per cycle.
    pub fn encode(&self, space: &PerceptSpace) -> Bits {
        let mut b = Bits::empty();
        for (a, e) in &self.cycles {
            b.push(a.bit());
            b.extend_from(&space.defs[e.0].code);
        }
        b
    }
}
