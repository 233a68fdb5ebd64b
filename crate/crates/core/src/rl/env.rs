use std::fmt::Debug;
use std::hash::Hash;
use std::sync::Arc;

use num::{One, Zero};

use super::policy::Policy;
use super::{Action, Discount, History, Percept, PerceptDef, PerceptSpace, RlError, TabularPolicy};
use crate::machine::{Bits, Evaluator, MachineError, Registry};
use crate::oracle::{PartialOracle, ProbabilityInterval};
use crate::rational::{parse_rational, Rational};

/// Conditional percept distributions driven by an explicit state.
///
/// `conditional` returns one interval per percept. Tabular backings return
/// point intervals that sum to one.
pub trait Environment {
    type State: Clone + Eq + Hash + Ord + Debug;

    fn percepts(&self) -> &PerceptSpace;
    fn initial(&self) -> Self::State;
    fn conditional(&self, s: &Self::State, a: Action) -> Result<Vec<ProbabilityInterval>, RlError>;
    fn transition(&self, s: &Self::State, a: Action, e: Percept) -> Result<Self::State, RlError>;
}

/// Folds `transition` over a history starting from the initial state.
pub fn state_after<E: Environment + ?Sized>(env: &E, h: &History) -> Result<E::State, RlError> {
    let mut s = env.initial();
    for (a, e) in &h.cycles {
        s = env.transition(&s, *a, *e)?;
    }
    Ok(s)
}

/// Finite-state environment with exact rational transition rows.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TabularEnv {
    space: PerceptSpace,
    initial: usize,
    /// `rows[s][a][e] = (probability, next state)`.
    rows: Vec<[Vec<(Rational, usize)>; 2]>,
}

impl TabularEnv {
    pub fn new(space: PerceptSpace, initial: usize, rows: Vec<[Vec<(Rational, usize)>; 2]>) -> Result<Self, RlError> {
        let n = rows.len();
        if initial >= n {
            return Err(RlError::InvalidConditional(format!("initial state {initial} of {n}")));
        }
        for (s, row) in rows.iter().enumerate() {
            for (ai, dist) in row.iter().enumerate() {
                if dist.len() != space.len() {
                    return Err(RlError::InvalidConditional(format!(
                        "state {s} action {ai}: {} entries for {} percepts",
                        dist.len(),
                        space.len()
                    )));
                }
                let mut total = Rational::zero();
                for (p, next) in dist {
                    if *p < Rational::zero() || *next >= n {
                        return Err(RlError::InvalidConditional(format!("state {s} action {ai}: bad entry")));
                    }
                    total += p;
                }
                if !total.is_one() {
                    return Err(RlError::InvalidConditional(format!(
                        "state {s} action {ai} sums to {}",
                        crate::rational::show(&total)
                    )));
                }
            }
        }
        Ok(TabularEnv { space, initial, rows })
    }

    /// One-state environment with a fixed percept distribution per action.
    pub fn bandit(space: PerceptSpace, alpha: Vec<Rational>, beta: Vec<Rational>) -> Result<Self, RlError> {
        let row = [alpha.into_iter().map(|p| (p, 0)).collect(), beta.into_iter().map(|p| (p, 0)).collect()];
        Self::new(space, 0, vec![row])
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn initial_state(&self) -> usize {
        self.initial
    }

    pub fn row(&self, s: usize, a: Action) -> &[(Rational, usize)] {
        &self.rows[s][a.index()]
    }

    /// Exact probability of `e` after action `a` in state `s`.
    pub fn prob(&self, s: usize, a: Action, e: Percept) -> &Rational {
        &self.rows[s][a.index()][e.0].0
    }

    /// Parses the text format, returning the optional discount declaration.
    ///
    /// ```text
    /// percept <name> <reward> <code>
    /// discount geometric <gamma> | discount horizon <H>
    /// states <n>
    /// initial <s>
    /// row <state> <a|b> <percept-name> <prob> <next>
    /// ```
    /// Missing rows are zero-probability entries; `#` starts a comment.
    pub fn from_text(text: &str) -> Result<(TabularEnv, Option<Discount>), RlError> {
        let err = |line: usize, msg: String| RlError::Parse { line, msg };
        let mut defs = Vec::new();
        let mut discount = None;
        let mut states: Option<usize> = None;
        let mut initial = 0usize;
        let mut entries = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let ln = ln + 1;
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| s.parse::<usize>().map_err(|_| err(ln, format!("bad integer {s}")));
            let ratio = |s: &str| parse_rational(s).map_err(|e| err(ln, e.to_string()));
            match (f[0], f.len()) {
                ("percept", 4) => defs.push(PerceptDef {
                    observation: f[1].to_string(),
                    reward: ratio(f[2])?,
                    code: f[3].parse().map_err(|_| err(ln, format!("bad code {}", f[3])))?,
                }),
                ("discount", 3) => {
                    discount = Some(match f[1] {
                        "geometric" => Discount::geometric(ratio(f[2])?).map_err(|e| err(ln, e.to_string()))?,
                        "horizon" => Discount::FiniteHorizon(num(f[2])? as u64),
                        other => return Err(err(ln, format!("unknown discount kind {other}"))),
                    })
                }
                ("states", 2) => states = Some(num(f[1])?),
                ("initial", 2) => initial = num(f[1])?,
                ("row", 6) => {
                    let a = Action::parse(f[2]).ok_or_else(|| err(ln, format!("bad action {}", f[2])))?;
                    entries.push((ln, num(f[1])?, a, f[3].to_string(), ratio(f[4])?, num(f[5])?));
                }
                _ => return Err(err(ln, format!("unrecognized line: {line}"))),
            }
        }
        let space = PerceptSpace::new(defs)?;
        let n = states.ok_or_else(|| err(0, "missing states line".into()))?;
        let blank = vec![(Rational::zero(), 0usize); space.len()];
        let mut rows = vec![[blank.clone(), blank]; n];
        for (ln, s, a, name, p, next) in entries {
            let e = space.by_name(&name).ok_or_else(|| err(ln, format!("unknown percept {name}")))?;
            if s >= n || next >= n {
                return Err(err(ln, "state out of range".into()));
            }
            rows[s][a.index()][e.0] = (p, next);
        }
        Ok((TabularEnv::new(space, initial, rows)?, discount))
    }
}

impl Environment for TabularEnv {
    type State = usize;

    fn percepts(&self) -> &PerceptSpace {
        &self.space
    }

    fn initial(&self) -> usize {
        self.initial
    }

    fn conditional(&self, s: &usize, a: Action) -> Result<Vec<ProbabilityInterval>, RlError> {
        Ok(self.rows[*s][a.index()].iter().map(|(p, _)| ProbabilityInterval::point(p.clone())).collect())
    }

    fn transition(&self, s: &usize, a: Action, e: Percept) -> Result<usize, RlError> {
        self.rows[*s][a.index()].get(e.0).map(|x| x.1).ok_or(RlError::BadPercept(e.0))
    }
}

/// Environment read off a registered machine under a partial oracle.
///
/// The machine receives the binary history encoding and emits percept bits;
/// each percept's conditional is the product of per-bit completed bounds.
#[derive(Debug, Clone)]
pub struct MachineEnv {
    registry: Arc<Registry>,
    index: usize,
    oracle: Arc<PartialOracle>,
    space: PerceptSpace,
}

pub fn env_from_machine(
    registry: Arc<Registry>,
    index: usize,
    oracle: Arc<PartialOracle>,
    space: PerceptSpace,
) -> Result<MachineEnv, RlError> {
    registry.get(index)?;
    oracle.check_fingerprint(&registry)?;
    if space.code_len() == 0 {
        return Err(RlError::EncodingCollision("machine-backed percepts need nonempty codes".into()));
    }
    Ok(MachineEnv { registry, index, oracle, space })
}

impl MachineEnv {
    pub fn registry(&self) -> &Arc<Registry> {
        &self.registry
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn oracle(&self) -> &Arc<PartialOracle> {
        &self.oracle
    }
}

impl PartialEq for MachineEnv {
    fn eq(&self, other: &Self) -> bool {
        self.index == other.index
            && self.space == other.space
            && self.oracle == other.oracle
            && self.registry.fingerprint() == other.registry.fingerprint()
    }
}

impl Environment for MachineEnv {
    type State = Bits;

    fn percepts(&self) -> &PerceptSpace {
        &self.space
    }

    fn initial(&self) -> Bits {
        Bits::empty()
    }

    fn conditional(&self, x: &Bits, a: Action) -> Result<Vec<ProbabilityInterval>, RlError> {
        let mut ev = Evaluator::new(&self.registry, self.oracle.as_ref());
        let k = self.oracle.level();
        let mut base = x.clone();
        base.push(a.bit());
        let mut out = Vec::with_capacity(self.space.len());
        for d in self.space.defs() {
            let mut input = base.clone();
            let mut iv = ProbabilityInterval::point(Rational::one());
            for bit in d.code.iter() {
                let od = ev.eval(self.index, &input, k)?;
                let (lo, hi) = if bit {
                    (od.p1.clone(), Rational::one() - &od.p0)
                } else {
                    (od.p0.clone(), Rational::one() - &od.p1)
                };
                let b = ProbabilityInterval::new(lo, hi).ok_or_else(|| {
                    RlError::Machine(MachineError::CostContract {
                        machine: self.index,
                        detail: "invalid output".into(),
                    })
                })?;
                iv = iv.mul(&b);
                input.push(bit);
            }
            out.push(iv);
        }
        Ok(out)
    }

    fn transition(&self, x: &Bits, a: Action, e: Percept) -> Result<Bits, RlError> {
        let mut y = x.clone();
        y.push(a.bit());
        y.extend_from(&self.space.get(e)?.code);
        Ok(y)
    }
}

/// A base environment that switches to reward-0-forever once the agent takes
/// an action the reference policy never takes.
#[derive(Debug, Clone)]
pub struct HellEnv {
    base: AnyEnv,
    reference: TabularPolicy,
    hell: Percept,
}

impl HellEnv {
    pub fn new(base: AnyEnv, reference: TabularPolicy) -> Result<Self, RlError> {
        if reference.num_percepts() != base.percepts().len() {
            return Err(RlError::Mismatch);
        }
        let hell = base.percepts().worst();
        Ok(HellEnv { base, reference, hell })
    }

    pub fn base(&self) -> &AnyEnv {
        &self.base
    }
}

/// Heterogeneous environment used in classes and mixtures.
#[derive(Debug, Clone)]
pub enum AnyEnv {
    Tabular(TabularEnv),
    Machine(MachineEnv),
    Hell(Box<HellEnv>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnyState {
    Tabular(usize),
    Machine(Bits),
    /// `(base state, reference policy state, deviated)`.
    Hell(Box<AnyState>, usize, bool),
}

impl From<TabularEnv> for AnyEnv {
    fn from(e: TabularEnv) -> Self {
        AnyEnv::Tabular(e)
    }
}

impl From<MachineEnv> for AnyEnv {
    fn from(e: MachineEnv) -> Self {
        AnyEnv::Machine(e)
    }
}

impl From<HellEnv> for AnyEnv {
    fn from(e: HellEnv) -> Self {
        AnyEnv::Hell(Box::new(e))
    }
}

impl AnyEnv {
    /// Machine index for registry-backed members.
    pub fn machine_index(&self) -> Option<usize> {
        match self {
            AnyEnv::Machine(m) => Some(m.index),
            _ => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        match self {
            AnyEnv::Tabular(_) => true,
            AnyEnv::Machine(_) => false,
            AnyEnv::Hell(h) => h.base.is_exact(),
        }
    }
}

fn state_mismatch() -> RlError {
    RlError::InvalidConditional("state does not belong to this environment".into())
}

impl Environment for AnyEnv {
    type State = AnyState;

    fn percepts(&self) -> &PerceptSpace {
        match self {
            AnyEnv::Tabular(e) => e.percepts(),
            AnyEnv::Machine(e) => e.percepts(),
            AnyEnv::Hell(h) => h.base.percepts(),
        }
    }

    fn initial(&self) -> AnyState {
        match self {
            AnyEnv::Tabular(e) => AnyState::Tabular(e.initial()),
            AnyEnv::Machine(e) => AnyState::Machine(e.initial()),
            AnyEnv::Hell(h) => AnyState::Hell(Box::new(h.base.initial()), h.reference.initial(), false),
        }
    }

    fn conditional(&self, s: &AnyState, a: Action) -> Result<Vec<ProbabilityInterval>, RlError> {
        match (self, s) {
            (AnyEnv::Tabular(e), AnyState::Tabular(x)) => e.conditional(x, a),
            (AnyEnv::Machine(e), AnyState::Machine(x)) => e.conditional(x, a),
            (AnyEnv::Hell(h), AnyState::Hell(base, ps, deviated)) => {
                let deviates = *deviated || h.reference.action_dist(ps)?.prob(a).is_zero();
                if deviates {
                    let n = h.base.percepts().len();
                    Ok((0..n)
                        .map(|e| {
                            ProbabilityInterval::point(if e == h.hell.0 { Rational::one() } else { Rational::zero() })
                        })
                        .collect())
                } else {
                    h.base.conditional(base, a)
                }
            }
            _ => Err(state_mismatch()),
        }
    }

    fn transition(&self, s: &AnyState, a: Action, e: Percept) -> Result<AnyState, RlError> {
        match (self, s) {
            (AnyEnv::Tabular(env), AnyState::Tabular(x)) => Ok(AnyState::Tabular(env.transition(x, a, e)?)),
            (AnyEnv::Machine(env), AnyState::Machine(x)) => Ok(AnyState::Machine(env.transition(x, a, e)?)),
            (AnyEnv::Hell(h), AnyState::Hell(base, ps, deviated)) => {
                if *deviated {
                    return Ok(s.clone());
                }
                if h.reference.action_dist(ps)?.prob(a).is_zero() {
                    return Ok(AnyState::Hell(base.clone(), *ps, true));
                }
                Ok(AnyState::Hell(Box::new(h.base.transition(base, a, e)?), h.reference.update(ps, a, e)?, false))
            }
            _ => Err(state_mismatch()),
        }
    }
}
