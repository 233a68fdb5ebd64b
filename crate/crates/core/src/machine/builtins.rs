use num::{One, Signed, Zero};

use super::bits::Bits;
use super::eval::{OutputDist, SubEval};
use super::registry::{BuiltinMachine, BuiltinStep};
use super::MachineError;
use crate::rational::{show, Rational};

/// Emits 1 with probability `p` regardless of input.
#[derive(Debug, Clone)]
pub struct Bernoulli {
    p: Rational,
}

impl Bernoulli {
    pub fn new(p: Rational) -> Result<Self, MachineError> {
        if p.is_negative() || p > Rational::one() {
            return Err(MachineError::InvalidParameter(format!("bernoulli parameter {p} outside [0, 1]")));
        }
        Ok(Bernoulli { p })
    }
}

impl BuiltinMachine for Bernoulli {
    fn name(&self) -> String {
        format!("bernoulli({})", show(&self.p))
    }

    fn code_length(&self) -> usize {
        4
    }

    fn oracle_cost(&self) -> u32 {
        1
    }

    fn output_cost(&self) -> u32 {
        1
    }

    fn step(&self, _: &Bits, _: &[bool], _: &mut SubEval<'_, '_>) -> Result<BuiltinStep, MachineError> {
        Ok(BuiltinStep::Output(OutputDist::new(self.p.clone(), Rational::one() - &self.p)))
    }
}

/// Bit layout of an interaction history: each cycle is `action_bits` action
/// bits followed by `percept_bits` percept bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MixtureLayout {
    pub action_bits: usize,
    pub percept_bits: usize,
}

impl MixtureLayout {
    fn cycle(&self) -> usize {
        self.action_bits + self.percept_bits
    }

    /// Whether position `p` of a history string holds a percept bit.
    pub fn is_percept_bit(&self, p: usize) -> bool {
        p % self.cycle() >= self.action_bits
    }
}

/// Bayes mixture of registered machines, predicting percept bits only.
///
/// For history `x` and member `m`, the likelihood of the percept bits of `x`
/// is bracketed by products of per-bit lower bounds `λ_m(b | prefix)` and upper
/// bounds `1 - λ_m(¬b | prefix)`. The output is
/// `Σ w_m lo_m λ_m(· | x) / Σ w_m hi_m`, a lower bound on the completed
/// posterior-predictive probability of each bit.
#[derive(Debug, Clone)]
pub struct Mixture {
    members: Vec<(usize, Rational)>,
    layout: MixtureLayout,
}

impl Mixture {
    pub fn new(members: Vec<(usize, Rational)>, layout: MixtureLayout) -> Result<Self, MachineError> {
        if members.is_empty() {
            return Err(MachineError::InvalidParameter("mixture needs at least one member".into()));
        }
        if layout.percept_bits == 0 {
            return Err(MachineError::InvalidParameter("mixture layout needs percept bits".into()));
        }
        if members.iter().any(|(i, w)| *i == 0 || !w.is_positive()) {
            return Err(MachineError::InvalidParameter("mixture weights must be positive".into()));
        }
        Ok(Mixture { members, layout })
    }

    pub fn members(&self) -> &[(usize, Rational)] {
        &self.members
    }

    pub fn layout(&self) -> MixtureLayout {
        self.layout
    }
}

impl BuiltinMachine for Mixture {
    fn name(&self) -> String {
        let ms: Vec<String> = self.members.iter().map(|(i, w)| format!("{i}:{}", show(w))).collect();
        format!("mixture(a={},e={};{})", self.layout.action_bits, self.layout.percept_bits, ms.join(","))
    }

    fn code_length(&self) -> usize {
        2 + 2 * self.members.len()
    }

    fn oracle_cost(&self) -> u32 {
        1
    }

    fn output_cost(&self) -> u32 {
        1
    }

    fn step(&self, input: &Bits, _: &[bool], ctx: &mut SubEval<'_, '_>) -> Result<BuiltinStep, MachineError> {
        if !self.layout.is_percept_bit(input.len()) {
            return Ok(BuiltinStep::Halt);
        }
        let mut num1 = Rational::zero();
        let mut num0 = Rational::zero();
        let mut den = Rational::zero();
        for (m, w) in &self.members {
            let mut lo = Rational::one();
            let mut hi = Rational::one();
            for p in (0..input.len()).filter(|&p| self.layout.is_percept_bit(p)) {
                let bit = input.get(p).unwrap_or(false);
                let d = ctx.simulate(*m, &input.prefix(p))?;
                lo *= d.prob(bit);
                hi *= Rational::one() - d.prob(!bit);
                if hi.is_zero() {
                    break;
                }
            }
            if hi.is_zero() {
                continue;
            }
            let cur = ctx.simulate(*m, input)?;
            num1 += w * &lo * &cur.p1;
            num0 += w * &lo * &cur.p0;
            den += w * hi;
        }
        if den.is_zero() {
            return Ok(BuiltinStep::Halt);
        }
        Ok(BuiltinStep::Output(OutputDist::new(num1 / &den, num0 / den)))
    }
}
