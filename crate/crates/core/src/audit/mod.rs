//! Verification oracles for allocations and run traces.

mod checks;
mod dominance;
mod efficiency;
mod sp1;

pub use checks::{
    audit_trace, envy_check, equilibrium_efficiency, greedy_check, trace_efficiency, AuditReport, EnvyPair, GreedyViolation, AUDIT_TOL,
};
pub use dominance::{cumulative, sd_compare, sd_compare_tol, DominanceVerdict, Relation, SD_TOL};
pub use efficiency::{
    allocation_efficiency, ordinal_efficiency_oracle, EfficiencyVerdict, Holder, EXACT_CELLS, FLOAT_TOL, RATIONAL_TOL,
};
pub use sp1::{sp1_probe, Sp1Report, Sp1Trial};
