//! Bayesian mixtures over finite environment classes and the agents built on
//! them.
//!
//! Priors follow a byte-length convention: a member whose description takes
//! `len` bytes gets weight `2^(-8 len)`. Program encodings are length-framed,
//! so the weights form a semidistribution without normalization.

mod agents;
mod mixture;

use std::path::Path;
use std::sync::Arc;

use num::{One, Zero};

pub use agents::{
    dogmatic_class, register_mixture_as_machine, thompson_policy, BayesPolicy, BayesPolicyState, ThompsonActor,
    ThompsonPolicy, ThompsonState,
};
pub use mixture::{mixture_conditional, posterior_update, BayesState, Belief, MixtureEnv};

use crate::machine::Registry;
use crate::oracle::PartialOracle;
use crate::rational::{self, parse_rational, Rational};
use crate::rl::{env_from_machine, AnyEnv, Environment, PerceptSpace, RlError, TabularEnv};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BayesError {
    #[error("environment class is empty")]
    EmptyClass,
    #[error("class member {0} has no code length")]
    MissingCodeLength(String),
    #[error("class members disagree on the percept space")]
    PerceptMismatch,
    #[error("prior weights must be positive, one per member")]
    BadPrior,
    #[error("class member {0} is not backed by the registry")]
    NotRegistryBacked(String),
    #[error("class manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },
    #[error("precision must be positive")]
    BadPrecision,
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Machine(#[from] crate::machine::MachineError),
}

#[derive(Debug, Clone)]
pub struct ClassMember {
    pub name: String,
    pub env: AnyEnv,
    /// Description length in bytes, when known.
    pub code_length: Option<usize>,
}

impl ClassMember {
    pub fn new(name: impl Into<String>, env: impl Into<AnyEnv>, code_length: Option<usize>) -> Self {
        ClassMember { name: name.into(), env: env.into(), code_length }
    }
}

/// Nonempty ordered list of environments over one percept space.
#[derive(Debug, Clone)]
pub struct EnvironmentClass {
    members: Vec<ClassMember>,
}

impl EnvironmentClass {
    pub fn new(members: Vec<ClassMember>) -> Result<Self, BayesError> {
        let first = members.first().ok_or(BayesError::EmptyClass)?;
        let space = first.env.percepts().clone();
        if members.iter().any(|m| *m.env.percepts() != space) {
            return Err(BayesError::PerceptMismatch);
        }
        Ok(EnvironmentClass { members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[ClassMember] {
        &self.members
    }

    pub fn member(&self, i: usize) -> &ClassMember {
        &self.members[i]
    }

    pub fn percepts(&self) -> &PerceptSpace {
        self.members[0].env.percepts()
    }

    /// Parses a class manifest.
    ///
    /// ```text
    /// member <name> env=<tabular file> [length=<bytes>] [weight=<w>]
    /// member <name> machine=<registry index> [length=<bytes>] [weight=<w>]
    /// ```
    /// Tabular paths are relative to `base`. Machine members need `machines`
    /// and use the binary percept space. Returns explicit weights when every
    /// member declares one.
    pub fn from_manifest(
        text: &str,
        base: &Path,
        machines: Option<(Arc<Registry>, Arc<PartialOracle>)>,
    ) -> Result<(EnvironmentClass, Option<Vec<Rational>>), BayesError> {
        let mut members = Vec::new();
        let mut weights = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line_no = ln + 1;
            let err = |msg: String| BayesError::Manifest { line: line_no, msg };
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f[0] != "member" || f.len() < 3 {
                return Err(err(format!("expected `member <name> ...`, got: {line}")));
            }
            let name = f[1].to_string();
            let mut env: Option<AnyEnv> = None;
            let mut length = None;
            let mut weight = None;
            for kv in &f[2..] {
                let (k, v) = kv.split_once('=').ok_or_else(|| err(format!("expected key=value, got {kv}")))?;
                match k {
                    "env" => {
                        let path = base.join(v);
                        let text = std::fs::read_to_string(&path)
                            .map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;
                        let (t, _) = TabularEnv::from_text(&text).map_err(|e| err(e.to_string()))?;
                        env = Some(t.into());
                    }
                    "machine" => {
                        let (reg, po) =
                            machines.clone().ok_or_else(|| err("machine members need a registry".into()))?;
                        let idx: usize = v.parse().map_err(|_| err(format!("bad index {v}")))?;
                        if length.is_none() {
                            length = Some(reg.code_length(idx)?);
                        }
                        env = Some(env_from_machine(reg, idx, po, PerceptSpace::binary())?.into());
                    }
                    "length" => length = Some(v.parse().map_err(|_| err(format!("bad length {v}")))?),
                    "weight" => weight = Some(parse_rational(v).map_err(|e| err(e.to_string()))?),
                    _ => return Err(err(format!("unknown key {k}"))),
                }
            }
            let env = env.ok_or_else(|| err("member needs env= or machine=".into()))?;
            members.push(ClassMember { name, env, code_length: length });
            weights.push(weight);
        }
        let class = EnvironmentClass::new(members)?;
        let explicit = if weights.iter().all(Option::is_some) {
            Some(weights.into_iter().map(Option::unwrap).collect())
        } else {
            None
        };
        Ok((class, explicit))
    }
}

/// `w(ν) = 2^(-8 len(ν))`, or `1/N` for every member when `uniform` is set.
pub fn prior_from_code_length(class: &EnvironmentClass, uniform: bool) -> Result<Vec<Rational>, BayesError> {
    if uniform {
        return Ok(vec![rational::rat(1, class.len() as i64); class.len()]);
    }
    class
        .members
        .iter()
        .map(|m| {
            let len = m.code_length.ok_or_else(|| BayesError::MissingCodeLength(m.name.clone()))?;
            Ok(rational::pow2_neg(8 * len as u32))
        })
        .collect()
}

/// Normalizes positive weights to sum to one.
pub(crate) fn normalize(prior: &[Rational]) -> Result<Vec<Rational>, BayesError> {
    if prior.iter().any(|w| *w <= Rational::zero()) {
        return Err(BayesError::BadPrior);
    }
    let total: Rational = prior.iter().cloned().sum();
    if total.is_one() {
        return Ok(prior.to_vec());
    }
    Ok(prior.iter().map(|w| w / &total).collect())
}
