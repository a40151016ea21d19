//! Hospital residents with sizes: instance model, stability checkers,
//! ordered-partition solver, exhaustive oracle, hardness gadgets and a
//! seeded experiment harness.

pub mod fixtures;
pub mod format;
pub mod harness;
pub mod instance;
pub mod json;
pub mod matching;
pub mod oracle;
pub mod partition;
pub mod reduce;
pub mod smti;
pub mod solver;
mod subset_sum;
pub mod verify;

pub use format::{parse_instance, serialize_instance, ParseError};
pub use instance::{
    validate, AgentId, HospitalId, Instance, InvalidInstance, Issue, Location, Problem, RawInstance,
    Severity, ValidationReport,
};
pub use matching::{is_feasible, matching_size, occupancy, Matching};
pub use partition::{
    detect_generalized_master_list, master_list_partition, size_descending_partition,
    validate_ordered_partition, OrderedPartition, Provenance,
};
pub use solver::{check_trace, solve, solve_matching, solve_occupancy, uniform_gs, SolveTrace};
pub use verify::{
    find_blocking_pairs, find_blocking_pairs_residual, find_occupancy_blocking_pairs, is_a_perfect,
    is_occupancy_stable, is_stable, BlockingKind, BlockingWitness,
};
