//! Level-k partial oracles on the dyadic grid, their extension relation, the
//! finite-time reflectivity check and completion bounds.

use std::fmt::Write as _;

use num::{One, Zero};
use rand::RngCore;

use crate::machine::eval::{AnswerProbs, Evaluator, OracleView};
use crate::machine::{Bits, Fingerprint, MachineError, Query, Registry};
use crate::rational::{clamp0, dyadic, pow2_neg, uniform, Rational};

/// Highest level a partial oracle may have (values are stored as `u64`).
pub const MAX_LEVEL: u32 = 62;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("level must be between 1 and {MAX_LEVEL}, got {0}")]
    BadLevel(u32),
    #[error("expected {expected} values at level {level}, got {found}")]
    WrongLength { level: u32, expected: usize, found: usize },
    #[error("value {value} for query {index} exceeds 2^{level}")]
    OffGrid { index: usize, value: u64, level: u32 },
    #[error("child level {child} is not parent level {parent} + 1")]
    LevelMismatch { parent: u32, child: u32 },
    #[error("fingerprints differ: {0} vs {1}")]
    FingerprintMismatch(String, String),
    #[error("malformed partial-oracle text at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Machine(#[from] MachineError),
}

/// Closed probability interval `[lo, hi] ⊆ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProbabilityInterval {
    lo: Rational,
    hi: Rational,
}

impl ProbabilityInterval {
    pub fn new(lo: Rational, hi: Rational) -> Option<Self> {
        (lo >= Rational::zero() && lo <= hi && hi <= Rational::one()).then_some(ProbabilityInterval { lo, hi })
    }

    pub fn point(p: Rational) -> Self {
        Self::new(p.clone(), p).expect("probability in [0, 1]")
    }

    pub fn unknown() -> Self {
        ProbabilityInterval { lo: Rational::zero(), hi: Rational::one() }
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn midpoint(&self) -> Rational {
        (&self.lo + &self.hi) / Rational::from_integer(2.into())
    }

    pub fn contains(&self, p: &Rational) -> bool {
        &self.lo <= p && p <= &self.hi
    }

    pub fn is_within(&self, outer: &ProbabilityInterval) -> bool {
        outer.lo <= self.lo && self.hi <= outer.hi
    }

    /// Interval product, valid because both factors lie in [0, 1].
    pub fn mul(&self, other: &ProbabilityInterval) -> ProbabilityInterval {
        ProbabilityInterval { lo: &self.lo * &other.lo, hi: &self.hi * &other.hi }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }
}

impl std::fmt::Display for ProbabilityInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", crate::rational::show(&self.lo), crate::rational::show(&self.hi))
    }
}

/// Answer probabilities `(one, zero)` for a grid value `v` at level `k`.
pub fn branch_probs(v: &Rational, k: u32) -> (Rational, Rational) {
    let off = pow2_neg(k + 1);
    (clamp0(v - &off), clamp0(Rational::one() - v - off))
}

/// A `k`-partial oracle: values `n_i / 2^k` for the first `k` queries.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartialOracle {
    level: u32,
    values: Vec<u64>,
    fingerprint: Fingerprint,
}

impl PartialOracle {
    pub fn new(level: u32, values: Vec<u64>, fingerprint: Fingerprint) -> Result<Self, OracleError> {
        if level == 0 || level > MAX_LEVEL {
            return Err(OracleError::BadLevel(level));
        }
        if values.len() != level as usize {
            return Err(OracleError::WrongLength { level, expected: level as usize, found: values.len() });
        }
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, &v)| v > 1u64 << level) {
            return Err(OracleError::OffGrid { index: i + 1, value: v, level });
        }
        Ok(PartialOracle { level, values, fingerprint })
    }

    pub fn for_registry(registry: &Registry, level: u32, values: Vec<u64>) -> Result<Self, OracleError> {
        Self::new(level, values, registry.fingerprint())
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Grid numerators `n_1..n_k`.
    pub fn numerators(&self) -> &[u64] {
        &self.values
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }

    /// `Õ(q_i)` for `1 ≤ i ≤ k`.
    pub fn value(&self, i: u64) -> Option<Rational> {
        let idx = usize::try_from(i).ok()?.checked_sub(1)?;
        self.values.get(idx).map(|&n| dyadic(n, self.level))
    }

    pub fn check_fingerprint(&self, registry: &Registry) -> Result<(), MachineError> {
        let fp = registry.fingerprint();
        if fp != self.fingerprint {
            return Err(MachineError::FingerprintMismatch { expected: fp.0, found: self.fingerprint.0.clone() });
        }
        Ok(())
    }

    /// `(one, zero, halt)` probabilities of an oracle call on `q_i`.
    pub fn answer_distribution(&self, i: u64) -> (Rational, Rational, Rational) {
        match self.value(i) {
            Some(v) => {
                let (one, zero) = branch_probs(&v, self.level);
                let halt = Rational::one() - &one - &zero;
                (one, zero, halt)
            }
            None => (Rational::zero(), Rational::zero(), Rational::one()),
        }
    }

    /// Text form: optional `#` comment lines, then `k`, then `k` lines `i n_i`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# fingerprint={}", self.fingerprint).unwrap();
        writeln!(s, "{}", self.level).unwrap();
        for (i, n) in self.values.iter().enumerate() {
            writeln!(s, "{} {}", i + 1, n).unwrap();
        }
        s
    }

    /// Parse [`PartialOracle::to_text`] output and bind it to `registry`.
    /// A `# fingerprint=` header, when present, must match.
    pub fn from_text(text: &str, registry: &Registry) -> Result<Self, OracleError> {
        let expected = registry.fingerprint();
        let mut level: Option<u32> = None;
        let mut values = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let t = raw.trim();
            let perr = |msg: &str| OracleError::Parse { line, msg: msg.to_string() };
            if t.is_empty() {
                continue;
            }
            if let Some(c) = t.strip_prefix('#') {
                if let Some(fp) = c.split_whitespace().find_map(|w| w.strip_prefix("fingerprint=")) {
                    if fp != expected.0 {
                        return Err(OracleError::FingerprintMismatch(expected.0.clone(), fp.to_string()));
                    }
                }
                continue;
            }
            match level {
                None => level = Some(t.parse().map_err(|_| perr("expected the level"))?),
                Some(_) => {
                    let mut parts = t.split_whitespace();
                    let i: usize = parts.next().and_then(|x| x.parse().ok()).ok_or_else(|| perr("bad index"))?;
                    let n: u64 = parts.next().and_then(|x| x.parse().ok()).ok_or_else(|| perr("bad value"))?;
                    if parts.next().is_some() || i != values.len() + 1 {
                        return Err(perr("expected `i n_i` with consecutive indices"));
                    }
                    values.push(n);
                }
            }
        }
        let level = level.ok_or(OracleError::Parse { line: 0, msg: "empty input".into() })?;
        Self::new(level, values, expected)
    }
}

impl OracleView for PartialOracle {
    fn answer_probs(&self, i: u64) -> Result<AnswerProbs, u64> {
        Ok(match self.value(i) {
            Some(v) => {
                let (one, zero) = branch_probs(&v, self.level);
                AnswerProbs::Branch { one, zero }
            }
            None => AnswerProbs::Halt,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Answer {
    One,
    Zero,
    Halt,
}

/// Sample the oracle's answer to `q_i`.
pub fn answer(po: &PartialOracle, i: u64, rng: &mut dyn RngCore) -> Answer {
    let (one, zero, _) = po.answer_distribution(i);
    let u = uniform(rng);
    if u < one {
        Answer::One
    } else if u < one + zero {
        Answer::Zero
    } else {
        Answer::Halt
    }
}

/// Whether `child` is within `2^-(k+1)` of `parent` on every old query.
pub fn extends(child: &PartialOracle, parent: &PartialOracle) -> Result<bool, OracleError> {
    if child.level != parent.level + 1 {
        return Err(OracleError::LevelMismatch { parent: parent.level, child: child.level });
    }
    if child.fingerprint != parent.fingerprint {
        return Err(OracleError::FingerprintMismatch(parent.fingerprint.0.clone(), child.fingerprint.0.clone()));
    }
    // On the child's grid the parent value is 2·n and the bound is one grid step.
    Ok(parent.values.iter().zip(&child.values).all(|(&p, &c)| (2 * p).abs_diff(c) <= 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// `λ(1|x) > p` but the value is not 1.
    MustBeOne,
    /// `λ(0|x) > 1 - p` but the value is not 0.
    MustBeZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub query_index: u64,
    pub query: Query,
    pub value: Rational,
    pub p1: Rational,
    pub p0: Rational,
    pub kind: ViolationKind,
}

/// Check one query's reflectivity constraints for a given value.
pub fn check_constraint(p1: &Rational, p0: &Rational, threshold: &Rational, value: &Rational) -> Option<ViolationKind> {
    if p1 > threshold && !value.is_one() {
        return Some(ViolationKind::MustBeOne);
    }
    if *p0 > Rational::one() - threshold && !value.is_zero() {
        return Some(ViolationKind::MustBeZero);
    }
    None
}

/// Verify partial reflectivity; returns the first violated query, if any.
pub fn is_partially_reflective(po: &PartialOracle, registry: &Registry) -> Result<Option<Violation>, OracleError> {
    po.check_fingerprint(registry)?;
    let mut ev = Evaluator::new(registry, po);
    for i in 1..=po.level as u64 {
        let Some(q) = registry.query(i) else { break };
        let d = ev.eval(q.machine, &q.input, po.level)?;
        let v = po.value(i).expect("i ≤ k");
        if let Some(kind) = check_constraint(&d.p1, &d.p0, &q.threshold, &v) {
            return Ok(Some(Violation { query_index: i, query: q, value: v, p1: d.p1, p0: d.p0, kind }));
        }
    }
    Ok(None)
}

/// `[λ(1|x), 1 - λ(0|x)]` under the truncated semantics.
pub fn completed_bounds(
    po: &PartialOracle,
    registry: &Registry,
    index: usize,
    input: &Bits,
) -> Result<ProbabilityInterval, MachineError> {
    let d = crate::machine::eval_truncated(registry, index, input, po)?;
    Ok(ProbabilityInterval::new(d.p1.clone(), Rational::one() - d.p0).expect("valid output distribution"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::library;
    use crate::rational::rat;
    use rand::SeedableRng;

    fn reg(srcs: &[&str]) -> Registry {
        let mut r = Registry::new();
        for s in srcs {
            r.register_source(s).unwrap();
        }
        r
    }

    #[test]
    fn answer_probabilities_at_the_grid_edges() {
        let r = reg(&[library::CONST_ONE]);
        let po = PartialOracle::for_registry(&r, 3, vec![8, 0, 4]).unwrap();
        assert_eq!(po.answer_distribution(1), (rat(15, 16), rat(0, 1), rat(1, 16)));
        assert_eq!(po.answer_distribution(2), (rat(0, 1), rat(15, 16), rat(1, 16)));
        assert_eq!(po.answer_distribution(4), (rat(0, 1), rat(0, 1), rat(1, 1)));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            assert_eq!(answer(&po, 4, &mut rng), Answer::Halt);
            assert_ne!(answer(&po, 1, &mut rng), Answer::Zero);
        }
    }

    #[test]
    fn sampled_answers_match_probabilities() {
        let r = reg(&[library::CONST_ONE]);
        let po = PartialOracle::for_registry(&r, 2, vec![2, 3]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = 4000;
        let ones = (0..n).filter(|_| answer(&po, 2, &mut rng) == Answer::One).count();
        // P(one) = 3/4 - 1/8 = 5/8.
        assert!((ones as f64 / n as f64 - 0.625).abs() < 0.03);
    }

    #[test]
    fn extends_examples() {
        let r = reg(&[library::CONST_ONE]);
        let p = PartialOracle::for_registry(&r, 1, vec![1]).unwrap();
        let c = PartialOracle::for_registry(&r, 2, vec![1, 0]).unwrap();
        assert!(extends(&c, &p).unwrap());
        let p0 = PartialOracle::for_registry(&r, 1, vec![0]).unwrap();
        let c2 = PartialOracle::for_registry(&r, 2, vec![2, 4]).unwrap();
        assert!(!extends(&c2, &p0).unwrap());
        assert!(extends(&PartialOracle::for_registry(&r, 2, vec![0, 3]).unwrap(), &p0).unwrap());
        assert!(matches!(extends(&p, &p), Err(OracleError::LevelMismatch { .. })));
        let other = PartialOracle::new(2, vec![2, 0], Fingerprint("x".into())).unwrap();
        assert!(matches!(extends(&other, &p), Err(OracleError::FingerprintMismatch(..))));
    }

    #[test]
    fn diagonalizer_reflectivity() {
        let r = reg(&[library::DIAGONALIZER]);
        for k in 3..=6u32 {
            let mut vals = vec![1u64 << (k - 1); k as usize];
            let ok = is_partially_reflective(&PartialOracle::for_registry(&r, k, vals.clone()).unwrap(), &r).unwrap();
            assert!(ok.is_none_or(|v| v.query_index != 1));
            vals[0] = 0;
            let v = is_partially_reflective(&PartialOracle::for_registry(&r, k, vals).unwrap(), &r).unwrap().unwrap();
            assert_eq!(v.query_index, 1);
            assert_eq!(v.kind, ViolationKind::MustBeOne);
            assert_eq!(v.p1, Rational::one() - pow2_neg(k + 1));
        }
    }

    #[test]
    fn constant_machine_forces_answer() {
        // q_3 = (1, ε, 1/4) for a one-machine registry.
        let r = reg(&[library::CONST_ONE]);
        let po = PartialOracle::for_registry(&r, 3, vec![8, 8, 0]).unwrap();
        let v = is_partially_reflective(&po, &r).unwrap().unwrap();
        assert_eq!((v.query_index, v.kind), (3, ViolationKind::MustBeOne));
        let po = PartialOracle::for_registry(&r, 3, vec![8, 8, 8]).unwrap();
        assert_eq!(is_partially_reflective(&po, &r).unwrap(), None);
    }

    #[test]
    fn bounds_examples() {
        let r = reg(&[library::CONST_ONE, library::LOOP, library::DIAGONALIZER]);
        let po = PartialOracle::for_registry(&r, 4, vec![8, 8, 8, 8]).unwrap();
        let e = Bits::empty();
        assert_eq!(completed_bounds(&po, &r, 1, &e).unwrap(), ProbabilityInterval::point(rat(1, 1)));
        assert_eq!(completed_bounds(&po, &r, 2, &e).unwrap(), ProbabilityInterval::unknown());
        // q_3 is (3, ε, 1/2), the diagonalizer's self-query.
        assert_eq!(r.query(3).unwrap().machine, 3);
        let b = completed_bounds(&po, &r, 3, &e).unwrap();
        assert_eq!(b, ProbabilityInterval::new(rat(15, 32), rat(17, 32)).unwrap());
        assert!(completed_bounds(&po, &r, 9, &e).is_err());
    }

    #[test]
    fn text_round_trip_and_fingerprint_guard() {
        let r = reg(&[library::CONST_ONE]);
        let po = PartialOracle::for_registry(&r, 3, vec![8, 5, 0]).unwrap();
        let text = po.to_text();
        assert_eq!(PartialOracle::from_text(&text, &r).unwrap(), po);
        assert_eq!(PartialOracle::from_text("3\n1 8\n2 5\n3 0\n", &r).unwrap(), po);
        let other = reg(&[library::CONST_ZERO]);
        assert!(matches!(PartialOracle::from_text(&text, &other), Err(OracleError::FingerprintMismatch(..))));
        assert!(eval_fails_on_mismatch(&po, &other));
        assert!(PartialOracle::from_text("2\n1 5\n2 0\n", &r).is_err());
        assert!(PartialOracle::from_text("2\n1 1\n3 0\n", &r).is_err());
    }

    fn eval_fails_on_mismatch(po: &PartialOracle, r: &Registry) -> bool {
        matches!(
            crate::machine::eval_truncated(r, 1, &Bits::empty(), po),
            Err(MachineError::FingerprintMismatch { .. })
        )
    }
}
