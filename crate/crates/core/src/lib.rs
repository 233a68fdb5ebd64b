//! Reflective-oracle construction by partial-oracle tree search, and
//! grain-of-truth reinforcement learning on top of it, in exact arithmetic.

pub mod bayes;
pub mod experiments;
pub mod machine;
pub mod multiagent;
pub mod oracle;
pub mod rational;
pub mod rl;
pub mod search;
