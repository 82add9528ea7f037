//! Independent oracles and adversarial analysis over completed runs.

mod attack;
mod census;
mod knowledge;
mod oracle;
mod symbolic;

pub use attack::{forced_guesses, merlin_reconstruct, Reconstruction};
pub use census::{count_instances, InstanceCensus};
pub use knowledge::{
    knowledge_closure, mask_safety_violations, Atom, KnowledgeSet, SafetyViolation,
};
pub use oracle::plaintext_oracle;
pub use symbolic::{
    expand_term, expected_chain_coefficient, symbolic_expand, Factor, SymbolicExpansion,
};
