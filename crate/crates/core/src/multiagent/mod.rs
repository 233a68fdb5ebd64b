//! Multi-agent interaction: tabular games, joint play, subjective
//! environments by exact belief filtering, best-response gaps and
//! backward-induction equilibria.

mod equilibrium;
mod play;
mod policies;
mod subjective;

pub use equilibrium::{informed_equilibrium, solve_stage_game, EquilibriumReport, DEFAULT_TREE_BUDGET};
pub use play::{play, play_with, Agent, JointCycle, JointHistory};
pub use policies::{pd_grim_policy, AnyPolicy, AnyPolicyState, CompletedPolicy, HistoryPolicy};
pub use subjective::{
    best_response_gap, gap_from, gap_in_env, induced_env, subjective_env, GapReport, JointBelief, SubjectiveEnv,
    DEFAULT_SUPPORT_BOUND,
};

use num::{One, Zero};

use crate::bayes::BayesError;
use crate::rational::{parse_rational, rat, Rational};
use crate::rl::{Action, Percept, PerceptDef, PerceptSpace, RlError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GameError {
    #[error("expected {expected} policies, got {got}")]
    PolicyCount { expected: usize, got: usize },
    #[error("invalid game: {0}")]
    InvalidGame(String),
    #[error("belief support {0} exceeds the configured bound")]
    SupportBound(usize),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("game tree of {0} nodes exceeds the configured budget")]
    TreeBudget(usize),
    #[error("game manifest line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Bayes(#[from] BayesError),
}

/// One possible joint result of a joint action.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Outcome {
    pub percepts: Vec<Percept>,
    pub prob: Rational,
    pub next: usize,
}

/// Finite-state multi-agent environment with exact outcome tables.
///
/// Joint actions are indexed by `Σ_i bit(a_i) 2^i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TabularGame {
    spaces: Vec<PerceptSpace>,
    initial: usize,
    outcomes: Vec<Vec<Vec<Outcome>>>,
}

pub fn joint_index(actions: &[Action]) -> usize {
    actions.iter().enumerate().map(|(i, a)| a.index() << i).sum()
}

pub fn joint_actions(n: usize) -> impl Iterator<Item = Vec<Action>> {
    (0..1usize << n).map(move |j| (0..n).map(|i| Action::from_index((j >> i) & 1)).collect())
}

impl TabularGame {
    pub fn new(spaces: Vec<PerceptSpace>, initial: usize, outcomes: Vec<Vec<Vec<Outcome>>>) -> Result<Self, GameError> {
        let n = spaces.len();
        let bad = |m: String| GameError::InvalidGame(m);
        if n == 0 || n > 8 {
            return Err(bad(format!("{n} agents")));
        }
        if initial >= outcomes.len() {
            return Err(bad("initial state out of range".into()));
        }
        for (s, row) in outcomes.iter().enumerate() {
            if row.len() != 1 << n {
                return Err(bad(format!("state {s} lists {} joint actions", row.len())));
            }
            for (j, outs) in row.iter().enumerate() {
                let mut total = Rational::zero();
                for o in outs {
                    if o.percepts.len() != n
                        || o.next >= outcomes.len()
                        || o.prob < Rational::zero()
                        || o.percepts.iter().zip(&spaces).any(|(e, sp)| e.0 >= sp.len())
                    {
                        return Err(bad(format!("state {s} joint action {j}: bad outcome")));
                    }
                    total += &o.prob;
                }
                if !total.is_one() {
                    return Err(bad(format!("state {s} joint action {j}: probabilities sum to {total}")));
                }
            }
        }
        Ok(TabularGame { spaces, initial, outcomes })
    }

    /// Deterministic one-state game from a payoff function `joint -> percepts`.
    pub fn repeated(spaces: Vec<PerceptSpace>, stage: impl Fn(&[Action]) -> Vec<Percept>) -> Result<Self, GameError> {
        let n = spaces.len();
        let row =
            joint_actions(n).map(|a| vec![Outcome { percepts: stage(&a), prob: Rational::one(), next: 0 }]).collect();
        Self::new(spaces, 0, vec![row])
    }

    pub fn agents(&self) -> usize {
        self.spaces.len()
    }

    pub fn space(&self, i: usize) -> &PerceptSpace {
        &self.spaces[i]
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn num_states(&self) -> usize {
        self.outcomes.len()
    }

    pub fn outcomes(&self, s: usize, actions: &[Action]) -> &[Outcome] {
        &self.outcomes[s][joint_index(actions)]
    }

    /// The game with α and β exchanged for `agent`.
    pub fn relabeled(&self, agent: usize) -> TabularGame {
        let outcomes =
            self.outcomes.iter().map(|row| (0..row.len()).map(|j| row[j ^ (1 << agent)].clone()).collect()).collect();
        TabularGame { spaces: self.spaces.clone(), initial: self.initial, outcomes }
    }

    /// Parses a game manifest.
    ///
    /// ```text
    /// agents <n>
    /// percept <agent> <name> <reward> <code>
    /// states <n>
    /// initial <s>
    /// outcome <state> <joint actions, e.g. ab> <percept names, comma separated> <prob> <next>
    /// ```
    /// Agents are numbered from 1; `#` starts a comment.
    pub fn from_text(text: &str) -> Result<TabularGame, GameError> {
        let mut n = None;
        let mut defs: Vec<Vec<PerceptDef>> = Vec::new();
        let mut states = None;
        let mut initial = 0;
        let mut entries = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line_no = ln + 1;
            let err = |msg: String| GameError::Parse { line: line_no, msg };
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad integer {s}")));
            let ratio = |s: &str| parse_rational(s).map_err(|e| err(e.to_string()));
            match (f[0], f.len()) {
                ("agents", 2) => {
                    let k = num(f[1])?;
                    n = Some(k);
                    defs = vec![Vec::new(); k];
                }
                ("percept", 5) => {
                    let a = num(f[1])?;
                    let slot =
                        a.checked_sub(1).and_then(|a| defs.get_mut(a)).ok_or_else(|| err(format!("bad agent {a}")))?;
                    slot.push(PerceptDef {
                        observation: f[2].to_string(),
                        reward: ratio(f[3])?,
                        code: f[4].parse().map_err(|_| err(format!("bad code {}", f[4])))?,
                    });
                }
                ("states", 2) => states = Some(num(f[1])?),
                ("initial", 2) => initial = num(f[1])?,
                ("outcome", 6) => {
                    let acts: Option<Vec<Action>> = f[2].chars().map(|c| Action::parse(&c.to_string())).collect();
                    let acts = acts.ok_or_else(|| err(format!("bad joint action {}", f[2])))?;
                    let names: Vec<String> = f[3].split(',').map(str::to_string).collect();
                    entries.push((line_no, num(f[1])?, acts, names, ratio(f[4])?, num(f[5])?));
                }
                _ => return Err(err(format!("unrecognized line: {line}"))),
            }
        }
        let n = n.ok_or(GameError::Parse { line: 0, msg: "missing agents line".into() })?;
        let spaces = defs.into_iter().map(PerceptSpace::new).collect::<Result<Vec<_>, _>>()?;
        let states = states.ok_or(GameError::Parse { line: 0, msg: "missing states line".into() })?;
        let mut outcomes = vec![vec![Vec::new(); 1 << n]; states];
        for (line, s, acts, names, prob, next) in entries {
            let err = |msg: String| GameError::Parse { line, msg };
            if acts.len() != n || names.len() != n || s >= states {
                return Err(err("outcome arity or state out of range".into()));
            }
            let percepts = names
                .iter()
                .zip(&spaces)
                .map(|(nm, sp)| sp.by_name(nm).ok_or_else(|| err(format!("unknown percept {nm}"))))
                .collect::<Result<Vec<_>, _>>()?;
            outcomes[s][joint_index(&acts)].push(Outcome { percepts, prob, next });
        }
        TabularGame::new(spaces, initial, outcomes)
    }
}

/// Percept space of matching pennies: the observation is empty, only the
/// reward is informative.
pub fn pennies_space() -> PerceptSpace {
    PerceptSpace::new(vec![
        PerceptDef { observation: "lose".into(), reward: Rational::zero(), code: "0".parse().unwrap() },
        PerceptDef { observation: "win".into(), reward: Rational::one(), code: "1".parse().unwrap() },
    ])
    .unwrap()
}

/// Agent 1 is paid when the actions agree, agent 2 when they differ.
pub fn make_matching_pennies() -> TabularGame {
    TabularGame::repeated(vec![pennies_space(), pennies_space()], |a| {
        if a[0] == a[1] {
            vec![Percept(1), Percept(0)]
        } else {
            vec![Percept(0), Percept(1)]
        }
    })
    .unwrap()
}

/// Prisoner's-dilemma percepts, indexed by `2 * own + other` with
/// cooperation as action index 0: the observation is the opponent's move.
pub fn pd_space() -> PerceptSpace {
    let mk = |obs: &str, r: Rational, code: &str| PerceptDef {
        observation: obs.into(),
        reward: r,
        code: code.parse().unwrap(),
    };
    PerceptSpace::new(vec![
        mk("cc", rat(3, 4), "00"),
        mk("cd", rat(0, 1), "01"),
        mk("dc", rat(1, 1), "10"),
        mk("dd", rat(1, 4), "11"),
    ])
    .unwrap()
}

/// Percept of an agent that played `own` against `other` in the prisoner's dilemma.
pub fn pd_percept(own: Action, other: Action) -> Percept {
    Percept(2 * own.index() + other.index())
}

/// Whether a prisoner's-dilemma percept reports a defecting opponent.
pub fn pd_opponent_defected(e: Percept) -> bool {
    e.0 % 2 == 1
}

/// Two-player prisoner's dilemma; α is cooperate and β is defect.
pub fn make_iterated_pd() -> TabularGame {
    TabularGame::repeated(vec![pd_space(), pd_space()], |a| vec![pd_percept(a[0], a[1]), pd_percept(a[1], a[0])])
        .unwrap()
}
