//! Structural certification of event-systems: naturality and atomicity.

mod atomicity;
mod naturality;

pub use atomicity::{
    atom_conservation_laws, atomic_decomposition, check_atomicity, check_atomicity_ordered, compute_atoms,
    compute_b_set, connected_search, connected_search_ordered, is_edge, substitute, AtomDecomposition,
    AtomicityStatus, AtomicityVerdict, BSet, BudgetUsage, SearchBudget, SearchOutcome, SearchResult, Violation,
};
pub use naturality::{
    certificate, cycle_weight, explicit_cycle, max_weight, wegscheider_check, CycleCertificate, NaturalityVerdict,
};
