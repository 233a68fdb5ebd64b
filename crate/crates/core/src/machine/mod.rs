//! Probabilistic oracle machines: programs, built-ins, the registry, the query
//! enumeration and exact truncated evaluation.

pub mod bits;
pub mod builtins;
pub mod eval;
pub mod program;
pub mod query;
pub mod registry;

pub use bits::Bits;
pub use eval::{AnswerProbs, Evaluator, OracleView, OutputDist};
pub use program::{assemble, library, AssembleError, Instr, Program};
pub use query::Query;
pub use registry::{BuiltinMachine, BuiltinStep, Entry, Fingerprint, Registry};

use crate::oracle::PartialOracle;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MachineError {
    #[error("machine index {index} is not in a registry of {registry_size}")]
    InvalidMachine { index: usize, registry_size: usize },
    #[error("built-in machine {machine} broke its contract: {detail}")]
    CostContract { machine: usize, detail: String },
    #[error("program still contains an unresolved SELF reference")]
    UnresolvedSelf,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("partial oracle fingerprint {found} does not match registry {expected}")]
    FingerprintMismatch { expected: String, found: String },
    /// Raised only by partial-assignment views during search.
    #[error("answer to query {0} is not assigned yet")]
    Unassigned(u64),
}

/// Exact output distribution of `T^Õ` on `input`, run for at most `po.level()` steps.
pub fn eval_truncated(
    registry: &Registry,
    index: usize,
    input: &Bits,
    po: &PartialOracle,
) -> Result<OutputDist, MachineError> {
    po.check_fingerprint(registry)?;
    Evaluator::new(registry, po).eval(index, input, po.level())
}

/// The first `n` enumerated queries.
pub fn enumerate_queries(registry: &Registry, n: usize) -> Vec<Query> {
    registry.enumerate_queries(n)
}
