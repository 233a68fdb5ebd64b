use std::fmt;
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::bits::Bits;
use super::builtins::{Bernoulli, Mixture, MixtureLayout};
use super::eval::{OutputDist, SubEval};
use super::program::{assemble, AssembleError, Program};
use super::query::{self, Query};
use super::MachineError;
use crate::rational::parse_rational;

/// One step of a natively implemented machine.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinStep {
    /// Ask the oracle; the evaluator branches on the answer and calls `step` again.
    Query(Query),
    Output(OutputDist),
    Halt,
}

/// A conditional semimeasure implemented in Rust.
///
/// The evaluator calls [`BuiltinMachine::step`] with the input and the oracle
/// answers received so far. Each oracle request costs `oracle_cost` steps and
/// the final output decision costs `output_cost` steps; both must be at least 1.
/// `SubEval::simulate` runs another registered machine within the remaining
/// budget, less the output cost.
pub trait BuiltinMachine: fmt::Debug + Send + Sync {
    /// Stable identity, parameters included. Feeds the registry fingerprint.
    fn name(&self) -> String;
    /// Declared code length in bytes.
    fn code_length(&self) -> usize;
    fn oracle_cost(&self) -> u32;
    fn output_cost(&self) -> u32;
    fn step(&self, input: &Bits, answers: &[bool], ctx: &mut SubEval<'_, '_>) -> Result<BuiltinStep, MachineError>;
}

#[derive(Debug, Clone)]
pub enum Entry {
    Program(Program),
    Builtin(Arc<dyn BuiltinMachine>),
}

#[derive(Debug, Clone)]
pub struct RegisteredMachine {
    pub name: String,
    pub entry: Entry,
}

impl RegisteredMachine {
    pub fn code_length(&self) -> usize {
        match &self.entry {
            Entry::Program(p) => p.code_length(),
            Entry::Builtin(b) => b.code_length(),
        }
    }
}

/// Hex digest binding partial oracles to a registry and the query enumeration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint(pub String);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Version tag of the query enumeration, mixed into every fingerprint.
pub const ENUMERATION_SCHEME: &str = "cantor-lenlex-odd-dyadic-v1";

/// Ordered, append-only machine list with 1-based indices.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    machines: Vec<RegisteredMachine>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.machines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.machines.is_empty()
    }

    /// Append `entry`; `SELF` in a program resolves to the returned index.
    pub fn register(&mut self, entry: Entry) -> usize {
        let index = self.machines.len() + 1;
        self.register_named(format!("T{index}"), entry)
    }

    pub fn register_named(&mut self, name: impl Into<String>, entry: Entry) -> usize {
        let index = self.machines.len() + 1;
        let entry = match entry {
            Entry::Program(p) => Entry::Program(p.resolve_self(index)),
            b => b,
        };
        self.machines.push(RegisteredMachine { name: name.into(), entry });
        index
    }

    pub fn register_program(&mut self, p: Program) -> usize {
        self.register(Entry::Program(p))
    }

    pub fn register_source(&mut self, src: &str) -> Result<usize, AssembleError> {
        Ok(self.register_program(assemble(src)?))
    }

    pub fn register_builtin(&mut self, b: Arc<dyn BuiltinMachine>) -> usize {
        let name = b.name();
        self.register_named(name, Entry::Builtin(b))
    }

    pub fn get(&self, index: usize) -> Result<&RegisteredMachine, MachineError> {
        index
            .checked_sub(1)
            .and_then(|i| self.machines.get(i))
            .ok_or(MachineError::InvalidMachine { index, registry_size: self.len() })
    }

    pub fn machines(&self) -> &[RegisteredMachine] {
        &self.machines
    }

    pub fn code_length(&self, index: usize) -> Result<usize, MachineError> {
        Ok(self.get(index)?.code_length())
    }

    pub fn query(&self, i: u64) -> Option<Query> {
        query::query_at(self.len(), i)
    }

    pub fn query_index(&self, q: &Query) -> Option<u64> {
        query::query_index(self.len(), q)
    }

    pub fn enumerate_queries(&self, n: usize) -> Vec<Query> {
        query::enumerate(self.len(), n)
    }

    pub fn fingerprint(&self) -> Fingerprint {
        let mut h = Sha256::new();
        h.update(ENUMERATION_SCHEME.as_bytes());
        h.update([0u8]);
        for m in &self.machines {
            match &m.entry {
                Entry::Program(p) => {
                    h.update(b"P");
                    let bytes = p.encode();
                    h.update((bytes.len() as u64).to_le_bytes());
                    h.update(&bytes);
                }
                Entry::Builtin(b) => {
                    h.update(b"B");
                    let name = b.name();
                    h.update((name.len() as u64).to_le_bytes());
                    h.update(name.as_bytes());
                    h.update([b.oracle_cost() as u8, b.output_cost() as u8]);
                }
            }
        }
        Fingerprint(hex::encode(&h.finalize()[..16]))
    }

    /// Build a registry from manifest text, resolving program paths against `base`.
    ///
    /// ```text
    /// # comment
    /// program diag.asm
    /// builtin bernoulli 3/4
    /// mixture actions=1 percepts=1 1:1/2 2:1/2
    /// ```
    pub fn from_manifest(text: &str, base: &Path) -> Result<Registry, ManifestError> {
        let mut reg = Registry::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: String| ManifestError::Line { line, msg };
            let mut parts = content.split_whitespace();
            let kind = parts.next().unwrap_or_default();
            let rest: Vec<&str> = parts.collect();
            match kind {
                "program" => {
                    let [path] = rest.as_slice() else {
                        return Err(err("expected `program <path>`".into()));
                    };
                    let full = base.join(path);
                    let src = std::fs::read_to_string(&full)
                        .map_err(|e| err(format!("cannot read {}: {e}", full.display())))?;
                    let prog = assemble(&src).map_err(|e| err(format!("{}: {e}", full.display())))?;
                    let name = Path::new(path).file_stem().map(|s| s.to_string_lossy().into_owned());
                    reg.register_named(name.unwrap_or_else(|| path.to_string()), Entry::Program(prog));
                }
                "builtin" => match rest.as_slice() {
                    ["bernoulli", p] => {
                        let p = parse_rational(p).map_err(|e| err(e.to_string()))?;
                        let b = Bernoulli::new(p).map_err(|e| err(e.to_string()))?;
                        reg.register_builtin(Arc::new(b));
                    }
                    ["coin"] => {
                        reg.register_builtin(Arc::new(Bernoulli::new(crate::rational::rat(1, 2)).unwrap()));
                    }
                    other => return Err(err(format!("unknown builtin `{}`", other.join(" ")))),
                },
                "mixture" => {
                    let mut layout = MixtureLayout { action_bits: 1, percept_bits: 1 };
                    let mut members = Vec::new();
                    for tok in rest {
                        if let Some(v) = tok.strip_prefix("actions=") {
                            layout.action_bits = v.parse().map_err(|_| err(format!("bad `{tok}`")))?;
                        } else if let Some(v) = tok.strip_prefix("percepts=") {
                            layout.percept_bits = v.parse().map_err(|_| err(format!("bad `{tok}`")))?;
                        } else if let Some((i, w)) = tok.split_once(':') {
                            let i: usize = i.parse().map_err(|_| err(format!("bad member `{tok}`")))?;
                            if i == 0 || i > reg.len() {
                                return Err(err(format!("member {i} is not registered yet")));
                            }
                            let w = parse_rational(w).map_err(|e| err(e.to_string()))?;
                            members.push((i, w));
                        } else {
                            return Err(err(format!("bad mixture token `{tok}`")));
                        }
                    }
                    let m = Mixture::new(members, layout).map_err(|e| err(e.to_string()))?;
                    reg.register_builtin(Arc::new(m));
                }
                other => return Err(err(format!("unknown entry kind `{other}`"))),
            }
        }
        Ok(reg)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("manifest line {line}: {msg}")]
    Line { line: usize, msg: String },
}
