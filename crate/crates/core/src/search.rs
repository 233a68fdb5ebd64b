//! Anytime depth-first search for an extending chain of partially reflective
//! partial oracles.
//!
//! Children of a node are the grid extensions in a fixed order: every old value
//! tries unchanged, one step down, one step up; the new query tries values from
//! the midpoint outward, lower side first. The first digit (query `q_1`) is the
//! most significant. Instead of materialising all candidates, the children are
//! produced by assigning digits one at a time and checking each query as soon as
//! every answer its evaluation reads is assigned. The order and the accepted
//! children are the same as filtering the full candidate list.
//!
//! A node is also rejected when no descendant at `max_level` can be partially
//! reflective. For a descendant at level `j`, every old value moves by less than
//! `2^-L - 2^-j`, so evaluating with the smallest answer probabilities still
//! possible gives lower bounds on the level-`j` output probabilities. When such
//! a bound forces an answer the current value is too far away, and the subtree
//! is pruned. Only dead subtrees are cut, so the chain found is unchanged.

use std::collections::HashMap;

use num::One;

use crate::machine::eval::{AnswerProbs, Evaluator, OracleView};
use crate::machine::{MachineError, OutputDist, Registry};
use crate::oracle::{branch_probs, check_constraint, PartialOracle, MAX_LEVEL};
use crate::rational::{clamp0, dyadic, pow2_neg, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SearchError {
    #[error("max level must be between 1 and {MAX_LEVEL}")]
    BadMaxLevel,
    #[error("the search tree was exhausted at level {0} without reaching the target level")]
    TreeExhausted(u32),
    #[error("query {index} is not enumerated at level {level}")]
    NotEnumerated { index: u64, level: u32 },
    #[error("trace did not reach level {0}")]
    LevelNotReached(u32),
    #[error(transparent)]
    Machine(#[from] MachineError),
}

/// Option order for a digit. `parent` is the old numerator at level `level - 1`,
/// or `None` for the new query.
fn digit_options(parent: Option<u64>, level: u32) -> Vec<u64> {
    let top = 1u64 << level;
    match parent {
        Some(n) => {
            let c = 2 * n;
            let mut v = vec![c];
            if c > 0 {
                v.push(c - 1);
            }
            if c < top {
                v.push(c + 1);
            }
            v
        }
        None => {
            let mid = top / 2;
            let mut v = vec![mid];
            for d in 1..=mid {
                v.push(mid - d);
                v.push(mid + d);
            }
            v
        }
    }
}

fn level_options(parent: Option<&PartialOracle>) -> Vec<Vec<u64>> {
    match parent {
        None => vec![digit_options(None, 1)],
        Some(p) => {
            let level = p.level() + 1;
            let mut v: Vec<Vec<u64>> = p.numerators().iter().map(|&n| digit_options(Some(n), level)).collect();
            v.push(digit_options(None, level));
            v
        }
    }
}

/// The three level-1 oracles, midpoint first: values 1/2, 0, 1.
pub fn root_candidates(registry: &Registry) -> Vec<PartialOracle> {
    let fp = registry.fingerprint();
    digit_options(None, 1)
        .into_iter()
        .map(|n| PartialOracle::new(1, vec![n], fp.clone()).expect("grid value"))
        .collect()
}

/// Lazy odometer over all extensions of a partial oracle.
pub struct ExtensionCandidates {
    parent_fp: crate::machine::Fingerprint,
    level: u32,
    options: Vec<Vec<u64>>,
    cursor: Vec<usize>,
    done: bool,
}

impl Iterator for ExtensionCandidates {
    type Item = PartialOracle;

    fn next(&mut self) -> Option<PartialOracle> {
        if self.done {
            return None;
        }
        let values: Vec<u64> = self.cursor.iter().zip(&self.options).map(|(&c, o)| o[c]).collect();
        // Advance the least significant digit first.
        self.done = true;
        for d in (0..self.cursor.len()).rev() {
            self.cursor[d] += 1;
            if self.cursor[d] < self.options[d].len() {
                self.done = false;
                break;
            }
            self.cursor[d] = 0;
        }
        Some(PartialOracle::new(self.level, values, self.parent_fp.clone()).expect("grid value"))
    }
}

/// All level-(k+1) extensions of `po`, in the documented order.
pub fn extension_candidates(po: &PartialOracle) -> ExtensionCandidates {
    let options = level_options(Some(po));
    ExtensionCandidates {
        parent_fp: po.fingerprint().clone(),
        level: po.level() + 1,
        cursor: vec![0; options.len()],
        options,
        done: false,
    }
}

/// Answers from a prefix of assigned digits at level `level`.
struct AssignedView<'a> {
    level: u32,
    values: &'a [u64],
}

impl OracleView for AssignedView<'_> {
    fn answer_probs(&self, i: u64) -> Result<AnswerProbs, u64> {
        if i > self.level as u64 {
            return Ok(AnswerProbs::Halt);
        }
        match self.values.get(i as usize - 1) {
            Some(&n) => {
                let (one, zero) = branch_probs(&dyadic(n, self.level), self.level);
                Ok(AnswerProbs::Branch { one, zero })
            }
            None => Err(i),
        }
    }
}

/// Smallest answer probabilities any level-`horizon` descendant can have.
struct PessimisticView<'a> {
    level: u32,
    horizon: u32,
    values: &'a [u64],
}

impl OracleView for PessimisticView<'_> {
    fn answer_probs(&self, i: u64) -> Result<AnswerProbs, u64> {
        if i > self.level as u64 {
            return Ok(AnswerProbs::Halt);
        }
        match self.values.get(i as usize - 1) {
            Some(&n) => {
                let v = dyadic(n, self.level);
                let slack = pow2_neg(self.level) - pow2_neg(self.horizon + 1);
                Ok(AnswerProbs::Branch { one: clamp0(&v - &slack), zero: clamp0(Rational::one() - v - slack) })
            }
            None => Err(i),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Check {
    Pass,
    Fail,
    Pending,
}

type EvalKey = (u32, u64, u32);
/// Answers an evaluation read, as `(query, answer)` pairs.
type Touched = Vec<(u64, u64)>;

/// Evaluations of one query under one view, keyed by the answers they read.
#[derive(Default)]
struct TouchCache {
    entries: HashMap<EvalKey, Vec<(Touched, OutputDist)>>,
}

struct Checker<'r> {
    registry: &'r Registry,
    max_level: u32,
    cache: TouchCache,
    evaluations: u64,
}

impl<'r> Checker<'r> {
    fn eval(
        &mut self,
        view_horizon: u32,
        level: u32,
        q: u64,
        assigned: &[u64],
    ) -> Result<Option<OutputDist>, MachineError> {
        let key = (level, q, view_horizon);
        if let Some(list) = self.cache.entries.get(&key) {
            for (touched, d) in list {
                if touched.iter().all(|&(i, v)| assigned.get(i as usize - 1) == Some(&v)) {
                    return Ok(Some(d.clone()));
                }
            }
        }
        let query = self.registry.query(q).expect("nonempty registry");
        let exact = AssignedView { level, values: assigned };
        let pess = PessimisticView { level, horizon: view_horizon, values: assigned };
        let view: &dyn OracleView = if view_horizon == level { &exact } else { &pess };
        let mut ev = Evaluator::new(self.registry, view);
        self.evaluations += 1;
        match ev.eval(query.machine, &query.input, view_horizon) {
            Ok(d) => {
                let touched: Vec<(u64, u64)> = ev
                    .touched()
                    .iter()
                    .filter(|&&i| i <= level as u64)
                    .map(|&i| (i, assigned[i as usize - 1]))
                    .collect();
                self.cache.entries.entry(key).or_default().push((touched, d.clone()));
                Ok(Some(d))
            }
            Err(MachineError::Unassigned(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Check query `q` (1-based, `q ≤ assigned.len()`) at `level`.
    fn check(&mut self, level: u32, q: u64, assigned: &[u64], lookahead: bool) -> Result<Check, MachineError> {
        let query = self.registry.query(q).expect("nonempty registry");
        let n = assigned[q as usize - 1];
        let v = dyadic(n, level);
        let mut pending = false;
        match self.eval(level, level, q, assigned)? {
            Some(d) => {
                if check_constraint(&d.p1, &d.p0, &query.threshold, &v).is_some() {
                    return Ok(Check::Fail);
                }
            }
            None => pending = true,
        }
        if lookahead {
            for j in level + 1..=self.max_level {
                match self.eval(j, level, q, assigned)? {
                    Some(d) => {
                        if !viable_value(&d, &query.threshold, n, level, j) {
                            return Ok(Check::Fail);
                        }
                    }
                    None => pending = true,
                }
            }
        }
        Ok(if pending { Check::Pending } else { Check::Pass })
    }
}

/// Can the numerator `n` at `level` still reach a value that the pessimistic
/// level-`j` bounds `d` force?
fn viable_value(d: &OutputDist, threshold: &Rational, n: u64, level: u32, j: u32) -> bool {
    let v = dyadic(n, level);
    let reach = pow2_neg(level) - pow2_neg(j);
    if d.p1 > *threshold && v < Rational::one() - &reach {
        return false;
    }
    if d.p0 > Rational::one() - threshold && v > reach {
        return false;
    }
    true
}

/// Whether every descendant level up to `max_level` could still be partially
/// reflective as far as the pessimistic bounds can tell.
pub fn lookahead_viable(registry: &Registry, po: &PartialOracle, max_level: u32) -> Result<bool, MachineError> {
    po.check_fingerprint(registry)?;
    let level = po.level();
    for q in 1..=level as u64 {
        let Some(query) = registry.query(q) else { return Ok(true) };
        let n = po.numerators()[q as usize - 1];
        for j in level + 1..=max_level {
            let view = PessimisticView { level, horizon: j, values: po.numerators() };
            let d = Evaluator::new(registry, &view).eval(query.machine, &query.input, j)?;
            if !viable_value(&d, &query.threshold, n, level, j) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Lazy enumeration of the accepted children of one node.
struct ChildIter {
    level: u32,
    options: Vec<Vec<u64>>,
    cursor: Vec<usize>,
    assigned: Vec<u64>,
    pending: Vec<Vec<u64>>,
    started: bool,
}

impl ChildIter {
    fn new(parent: Option<&PartialOracle>) -> Self {
        ChildIter {
            level: parent.map_or(1, |p| p.level() + 1),
            options: level_options(parent),
            cursor: Vec::new(),
            assigned: Vec::new(),
            pending: Vec::new(),
            started: false,
        }
    }

    fn next(&mut self, checker: &mut Checker<'_>, lookahead: bool) -> Result<Option<Vec<u64>>, MachineError> {
        let empty_registry = checker.registry.is_empty();
        if !self.started {
            self.started = true;
            self.cursor.push(0);
        }
        loop {
            let Some(&c) = self.cursor.last() else { return Ok(None) };
            let d = self.cursor.len() - 1;
            if c >= self.options[d].len() {
                self.cursor.pop();
                self.pending.truncate(d);
                match self.cursor.last_mut() {
                    Some(prev) => *prev += 1,
                    None => return Ok(None),
                }
                continue;
            }
            self.assigned.truncate(d);
            self.assigned.push(self.options[d][c]);
            let mut to_check: Vec<u64> = if d == 0 { Vec::new() } else { self.pending[d - 1].clone() };
            if !empty_registry {
                to_check.push(d as u64 + 1);
            }
            let mut remaining = Vec::new();
            let mut failed = false;
            for q in to_check {
                match checker.check(self.level, q, &self.assigned, lookahead)? {
                    Check::Pass => {}
                    Check::Fail => {
                        failed = true;
                        break;
                    }
                    Check::Pending => remaining.push(q),
                }
            }
            if failed {
                self.cursor[d] += 1;
                continue;
            }
            self.pending.truncate(d);
            self.pending.push(remaining);
            if d + 1 == self.options.len() {
                debug_assert!(self.pending[d].is_empty(), "every query resolves once all digits are set");
                self.cursor[d] += 1;
                return Ok(Some(self.assigned.clone()));
            }
            self.cursor.push(0);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    pub id: usize,
    pub parent: Option<usize>,
    pub oracle: PartialOracle,
    /// Backtracks recorded at this level when the node was emitted.
    pub backtracks: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchStatus {
    /// A node at the target level was accepted.
    Complete,
    /// The node budget ran out first.
    BudgetExhausted,
}

#[derive(Debug, Clone)]
pub struct OracleTrace {
    pub max_level: u32,
    pub emissions: Vec<Emission>,
    /// Abandoned nodes per level (index 0 is level 1).
    pub backtracks: Vec<u64>,
    /// Whether each level's chain value is final under this run.
    pub stabilized: Vec<bool>,
    /// Emission ids of the final chain, level 1 first.
    pub chain: Vec<usize>,
    pub status: SearchStatus,
    /// Number of truncated evaluations performed.
    pub evaluations: u64,
}

impl OracleTrace {
    /// Nothing was accepted (budget zero).
    pub fn is_empty(&self) -> bool {
        self.emissions.is_empty()
    }

    pub fn chain_oracles(&self) -> Vec<&PartialOracle> {
        self.chain.iter().map(|&id| &self.emissions[id].oracle).collect()
    }

    pub fn oracle_at_level(&self, k: u32) -> Option<&PartialOracle> {
        let idx = (k as usize).checked_sub(1)?;
        self.chain.get(idx).map(|&id| &self.emissions[id].oracle)
    }

    pub fn final_oracle(&self) -> Option<&PartialOracle> {
        self.chain.last().map(|&id| &self.emissions[id].oracle)
    }

    pub fn reached_level(&self) -> u32 {
        self.chain.len() as u32
    }
}

/// Search options beyond the required level and budget.
#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    /// Prune subtrees with no partially reflective node at the target level.
    pub lookahead: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { lookahead: true }
    }
}

/// Depth-first search to `max_level`, accepting at most `budget` nodes.
pub fn search(registry: &Registry, max_level: u32, budget: u64) -> Result<OracleTrace, SearchError> {
    search_with(registry, max_level, budget, SearchOptions::default())
}

pub fn search_with(
    registry: &Registry,
    max_level: u32,
    budget: u64,
    opts: SearchOptions,
) -> Result<OracleTrace, SearchError> {
    if max_level == 0 || max_level > MAX_LEVEL {
        return Err(SearchError::BadMaxLevel);
    }
    let fp = registry.fingerprint();
    let mut checker = Checker { registry, max_level, cache: TouchCache::default(), evaluations: 0 };
    let mut trace = OracleTrace {
        max_level,
        emissions: Vec::new(),
        backtracks: vec![0; max_level as usize],
        stabilized: vec![false; max_level as usize],
        chain: Vec::new(),
        status: SearchStatus::BudgetExhausted,
        evaluations: 0,
    };
    let mut roots = ChildIter::new(None);
    // Each frame: emission id, its oracle, and the iterator over its children.
    let mut stack: Vec<(usize, PartialOracle, ChildIter)> = Vec::new();
    loop {
        let (level, next) = match stack.last_mut() {
            Some((_, po, it)) => (po.level() + 1, it.next(&mut checker, opts.lookahead)?),
            None => (1, roots.next(&mut checker, opts.lookahead)?),
        };
        match next {
            Some(values) => {
                if trace.emissions.len() as u64 >= budget {
                    break;
                }
                let po = PartialOracle::new(level, values, fp.clone()).expect("grid values");
                let id = trace.emissions.len();
                trace.emissions.push(Emission {
                    id,
                    parent: stack.last().map(|f| f.0),
                    oracle: po.clone(),
                    backtracks: trace.backtracks[level as usize - 1],
                });
                if level == max_level {
                    trace.status = SearchStatus::Complete;
                    trace.chain = stack.iter().map(|f| f.0).chain(std::iter::once(id)).collect();
                    break;
                }
                let it = ChildIter::new(Some(&po));
                stack.push((id, po, it));
            }
            None => match stack.pop() {
                Some((_, po, _)) => trace.backtracks[po.level() as usize - 1] += 1,
                None => {
                    return Err(SearchError::TreeExhausted(level));
                }
            },
        }
    }
    if trace.status == SearchStatus::BudgetExhausted {
        trace.chain = stack.iter().map(|f| f.0).collect();
    }
    if trace.status == SearchStatus::Complete {
        trace.stabilized = vec![true; max_level as usize];
    }
    trace.evaluations = checker.evaluations;
    Ok(trace)
}

/// The level-`k` chain value of `q_i`.
pub fn answer_at_level(trace: &OracleTrace, i: u64, k: u32) -> Result<Rational, SearchError> {
    if i == 0 || i > k as u64 {
        return Err(SearchError::NotEnumerated { index: i, level: k });
    }
    let po = trace.oracle_at_level(k).ok_or(SearchError::LevelNotReached(k))?;
    Ok(po.value(i).expect("i ≤ k"))
}
