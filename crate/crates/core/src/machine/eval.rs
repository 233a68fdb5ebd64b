//! Exact truncated evaluation by exhaustive branch enumeration.

use std::collections::{BTreeSet, HashMap};

use num::{One, Signed, Zero};

use super::bits::Bits;
use super::program::{Instr, MachineRef, Program, StringExpr};
use super::registry::{BuiltinStep, Entry, Registry};
use super::MachineError;
use crate::rational::Rational;

/// Probabilities of emitting 1 and 0 within the step budget.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OutputDist {
    pub p1: Rational,
    pub p0: Rational,
}

impl OutputDist {
    pub fn zero() -> Self {
        OutputDist { p1: Rational::zero(), p0: Rational::zero() }
    }

    pub fn point(bit: bool) -> Self {
        if bit {
            OutputDist { p1: Rational::one(), p0: Rational::zero() }
        } else {
            OutputDist { p1: Rational::zero(), p0: Rational::one() }
        }
    }

    pub fn new(p1: Rational, p0: Rational) -> Self {
        OutputDist { p1, p0 }
    }

    pub fn prob(&self, bit: bool) -> &Rational {
        if bit {
            &self.p1
        } else {
            &self.p0
        }
    }

    /// Mass lost to truncation or non-halting.
    pub fn deficit(&self) -> Rational {
        Rational::one() - &self.p1 - &self.p0
    }

    pub fn is_valid(&self) -> bool {
        !self.p1.is_negative() && !self.p0.is_negative() && &self.p1 + &self.p0 <= Rational::one()
    }

    fn add_scaled(&mut self, w: &Rational, other: &OutputDist) {
        if w.is_zero() {
            return;
        }
        self.p1 += w * &other.p1;
        self.p0 += w * &other.p0;
    }
}

/// How an oracle call on `q_i` resolves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnswerProbs {
    /// The branch halts with certainty.
    Halt,
    /// Answer 1 with `one`, 0 with `zero`, halt with the rest.
    Branch { one: Rational, zero: Rational },
}

/// Source of answer probabilities for oracle calls during evaluation.
pub trait OracleView {
    /// `Err(i)` signals that the answer to `q_i` is not decided yet.
    fn answer_probs(&self, query_index: u64) -> Result<AnswerProbs, u64>;
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct ProgState {
    pc: usize,
    stack: Vec<bool>,
    pos: usize,
    buf: Bits,
}

/// Evaluator sharing a sub-evaluation cache across calls with one oracle view.
///
/// It also records every query index whose answer influenced a result, which
/// the search uses to reuse evaluations across candidate oracles.
pub struct Evaluator<'a> {
    registry: &'a Registry,
    oracle: &'a dyn OracleView,
    cache: HashMap<(usize, Bits, u32), OutputDist>,
    touched: BTreeSet<u64>,
}

/// Handle passed to builtins for simulating other registered machines.
pub struct SubEval<'e, 'a> {
    evaluator: &'e mut Evaluator<'a>,
    budget: u32,
}

impl SubEval<'_, '_> {
    /// Steps available to a sub-simulation.
    pub fn budget(&self) -> u32 {
        self.budget
    }

    /// Truncated output distribution of machine `index` on `input`.
    pub fn simulate(&mut self, index: usize, input: &Bits) -> Result<OutputDist, MachineError> {
        self.evaluator.eval(index, input, self.budget)
    }

    pub fn registry(&self) -> &Registry {
        self.evaluator.registry
    }
}

impl<'a> Evaluator<'a> {
    pub fn new(registry: &'a Registry, oracle: &'a dyn OracleView) -> Self {
        Evaluator { registry, oracle, cache: HashMap::new(), touched: BTreeSet::new() }
    }

    pub fn touched(&self) -> &BTreeSet<u64> {
        &self.touched
    }

    pub fn clear_touched(&mut self) {
        self.touched.clear();
    }

    /// Output distribution of machine `index` on `input` within `budget` steps.
    pub fn eval(&mut self, index: usize, input: &Bits, budget: u32) -> Result<OutputDist, MachineError> {
        let key = (index, input.clone(), budget);
        if let Some(d) = self.cache.get(&key) {
            return Ok(d.clone());
        }
        let machine = self.registry.get(index)?;
        let result = match &machine.entry {
            Entry::Program(p) => {
                let p = p.clone();
                let mut memo = HashMap::new();
                let start = ProgState { pc: 0, stack: Vec::new(), pos: 0, buf: Bits::empty() };
                self.run_program(&p, input, start, budget, &mut memo)?
            }
            Entry::Builtin(_) => self.run_builtin(index, input, &mut Vec::new(), budget)?,
        };
        self.cache.insert(key, result.clone());
        Ok(result)
    }

    fn oracle_branch(&mut self, q: &super::query::Query) -> Result<AnswerProbs, MachineError> {
        let Some(i) = self.registry.query_index(q) else {
            return Ok(AnswerProbs::Halt);
        };
        match self.oracle.answer_probs(i) {
            Ok(a) => {
                self.touched.insert(i);
                Ok(a)
            }
            Err(i) => Err(MachineError::Unassigned(i)),
        }
    }

    fn run_program(
        &mut self,
        prog: &Program,
        input: &Bits,
        mut st: ProgState,
        mut budget: u32,
        memo: &mut HashMap<(ProgState, u32), OutputDist>,
    ) -> Result<OutputDist, MachineError> {
        let key = (st.clone(), budget);
        if let Some(d) = memo.get(&key) {
            return Ok(d.clone());
        }
        // Straight-line steps are executed in place; only branching recurses.
        let result = loop {
            if budget == 0 {
                break OutputDist::zero();
            }
            let Some(instr) = prog.instrs().get(st.pc) else {
                break OutputDist::zero();
            };
            budget -= 1;
            st.pc += 1;
            match instr {
                Instr::Coin => {
                    let half = Rational::new(1.into(), 2.into());
                    let mut out = OutputDist::zero();
                    for b in [true, false] {
                        let mut s = st.clone();
                        s.stack.push(b);
                        let d = self.run_program(prog, input, s, budget, memo)?;
                        out.add_scaled(&half, &d);
                    }
                    break out;
                }
                Instr::Input => match input.get(st.pos) {
                    Some(b) => {
                        st.pos += 1;
                        st.stack.push(b);
                    }
                    None => break OutputDist::zero(),
                },
                Instr::Push(b) => st.stack.push(*b),
                Instr::Pop => {
                    if st.stack.pop().is_none() {
                        break OutputDist::zero();
                    }
                }
                Instr::Dup => match st.stack.last() {
                    Some(&b) => st.stack.push(b),
                    None => break OutputDist::zero(),
                },
                Instr::Not => match st.stack.pop() {
                    Some(b) => st.stack.push(!b),
                    None => break OutputDist::zero(),
                },
                Instr::Jmp(t) => st.pc = *t,
                Instr::Jz(t) => match st.stack.pop() {
                    Some(false) => st.pc = *t,
                    Some(true) => {}
                    None => break OutputDist::zero(),
                },
                Instr::Out(b) => break OutputDist::point(*b),
                Instr::Halt => break OutputDist::zero(),
                Instr::QClear => st.buf = Bits::empty(),
                Instr::QLit(bits) => st.buf.extend_from(bits),
                Instr::QPush => match st.stack.pop() {
                    Some(b) => st.buf.push(b),
                    None => break OutputDist::zero(),
                },
                Instr::QInput => st.buf.extend_from(input),
                Instr::QPrefix(n) => st.buf.extend_from(&input.prefix(*n)),
                Instr::Oracle { machine, string, threshold } => {
                    let m = match machine {
                        MachineRef::Index(i) => *i,
                        MachineRef::SelfRef => return Err(MachineError::UnresolvedSelf),
                    };
                    let q = super::query::Query {
                        machine: m,
                        input: match string {
                            StringExpr::Literal(b) => b.clone(),
                            StringExpr::Buffer => st.buf.clone(),
                            StringExpr::Input => input.clone(),
                        },
                        threshold: threshold.clone(),
                    };
                    match self.oracle_branch(&q)? {
                        AnswerProbs::Halt => break OutputDist::zero(),
                        AnswerProbs::Branch { one, zero } => {
                            let mut out = OutputDist::zero();
                            for (b, w) in [(true, one), (false, zero)] {
                                if w.is_zero() {
                                    continue;
                                }
                                let mut s = st.clone();
                                s.stack.push(b);
                                let d = self.run_program(prog, input, s, budget, memo)?;
                                out.add_scaled(&w, &d);
                            }
                            break out;
                        }
                    }
                }
            }
        };
        memo.insert(key, result.clone());
        Ok(result)
    }

    fn run_builtin(
        &mut self,
        index: usize,
        input: &Bits,
        answers: &mut Vec<bool>,
        budget: u32,
    ) -> Result<OutputDist, MachineError> {
        let Entry::Builtin(b) = &self.registry.get(index)?.entry else {
            unreachable!("run_builtin on a program");
        };
        let b = b.clone();
        let (oc, uc) = (b.oracle_cost(), b.output_cost());
        if oc == 0 || uc == 0 {
            return Err(MachineError::CostContract {
                machine: index,
                detail: format!("declared costs must be positive (oracle {oc}, output {uc})"),
            });
        }
        let step = {
            let mut ctx = SubEval { evaluator: self, budget: budget.saturating_sub(uc) };
            b.step(input, answers, &mut ctx)?
        };
        match step {
            BuiltinStep::Halt => Ok(OutputDist::zero()),
            BuiltinStep::Output(d) => {
                if !d.is_valid() {
                    return Err(MachineError::CostContract {
                        machine: index,
                        detail: format!("invalid output distribution ({}, {})", d.p1, d.p0),
                    });
                }
                Ok(if budget >= uc { d } else { OutputDist::zero() })
            }
            BuiltinStep::Query(q) => {
                if budget < oc {
                    return Ok(OutputDist::zero());
                }
                match self.oracle_branch(&q)? {
                    AnswerProbs::Halt => Ok(OutputDist::zero()),
                    AnswerProbs::Branch { one, zero } => {
                        let mut out = OutputDist::zero();
                        for (bit, w) in [(true, one), (false, zero)] {
                            if w.is_zero() {
                                continue;
                            }
                            answers.push(bit);
                            let d = self.run_builtin(index, input, answers, budget - oc);
                            answers.pop();
                            out.add_scaled(&w, &d?);
                        }
                        Ok(out)
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::program::{assemble, library};
    use crate::rational::rat;

    /// Oracle view giving every query the same answer probabilities.
    struct Fixed(Rational, Rational);
    impl OracleView for Fixed {
        fn answer_probs(&self, _: u64) -> Result<AnswerProbs, u64> {
            Ok(AnswerProbs::Branch { one: self.0.clone(), zero: self.1.clone() })
        }
    }

    fn eval_src(src: &str, input: &str, budget: u32, o: &dyn OracleView) -> OutputDist {
        let mut r = Registry::new();
        let i = r.register_program(assemble(src).unwrap());
        Evaluator::new(&r, o).eval(i, &input.parse().unwrap(), budget).unwrap()
    }

    #[test]
    fn coin_programs() {
        let o = Fixed(rat(0, 1), rat(0, 1));
        assert_eq!(eval_src(library::FAIR_COIN, "", 3, &o), OutputDist::new(rat(1, 2), rat(1, 2)));
        assert_eq!(eval_src(library::FAIR_COIN, "", 2, &o), OutputDist::zero());
        assert_eq!(eval_src(library::COIN_3_4, "", 5, &o), OutputDist::new(rat(3, 4), rat(1, 4)));
        // The direct OUT1 branch finishes in 3 steps; the others need 5.
        assert_eq!(eval_src(library::COIN_3_4, "", 4, &o), OutputDist::new(rat(1, 2), rat(0, 1)));
    }

    #[test]
    fn input_exhaustion_halts() {
        let o = Fixed(rat(0, 1), rat(0, 1));
        assert_eq!(eval_src(library::ECHO, "", 10, &o), OutputDist::zero());
        assert_eq!(eval_src(library::ECHO, "1", 10, &o), OutputDist::point(true));
        assert_eq!(eval_src(library::ECHO, "01", 10, &o), OutputDist::point(false));
    }

    #[test]
    fn stack_underflow_and_fallthrough() {
        let o = Fixed(rat(0, 1), rat(0, 1));
        assert_eq!(eval_src("POP\nOUT1", "", 10, &o), OutputDist::zero());
        assert_eq!(eval_src("PUSH1", "", 10, &o), OutputDist::zero());
        assert_eq!(eval_src("PUSH0\nNOT\nJZ a\nOUT1\na: OUT0", "", 10, &o), OutputDist::point(true));
        assert_eq!(eval_src(library::LOOP, "", 50, &o), OutputDist::zero());
    }

    #[test]
    fn oracle_branches_weighted() {
        let o = Fixed(rat(1, 4), rat(1, 2));
        let d = eval_src("ORACLE 1, ε, 1/2\nJZ z\nOUT1\nz: OUT0", "", 3, &o);
        assert_eq!(d, OutputDist::new(rat(1, 4), rat(1, 2)));
    }

    #[test]
    fn query_buffer_controls_the_query() {
        struct Only(u64);
        impl OracleView for Only {
            fn answer_probs(&self, i: u64) -> Result<AnswerProbs, u64> {
                Ok(if i == self.0 {
                    AnswerProbs::Branch { one: rat(1, 1), zero: rat(0, 1) }
                } else {
                    AnswerProbs::Halt
                })
            }
        }
        // With one machine, q_2 = (1, "0", 1/2).
        let src = "QLIT 0\nORACLE 1, BUF, 1/2\nJZ z\nOUT1\nz: OUT0";
        assert_eq!(eval_src(src, "", 5, &Only(2)), OutputDist::point(true));
        assert_eq!(eval_src(src, "", 5, &Only(1)), OutputDist::zero());
        let src = "QPREFIX 1\nORACLE 1, BUF, 1/2\nJZ z\nOUT1\nz: OUT0";
        assert_eq!(eval_src(src, "01", 5, &Only(2)), OutputDist::point(true));
        assert_eq!(eval_src("ORACLE 1, IN, 1/2\nOUT1", "0", 5, &Only(2)), OutputDist::point(true));
    }
}
