//! Exact solvers for the small settings, used as ground truth for learned strategies.

mod objective;
mod report;
mod spm;
mod stackelberg;

pub use objective::{
    exact_objective, gradient_check, GradientCheckConfig, GradientCoordinate, DEFAULT_BRANCH_CAP,
};
pub use report::OracleReport;
pub use spm::{solve_spm_exhaustive, SpmSolution, SpmTree, DEFAULT_TREE_CAP, MAX_PROFILES};
pub use stackelberg::{
    enumerate_maps, solve_deterministic_stackelberg, solve_randomized_stackelberg, Commitment,
    ObservationMap, StackelbergSolution, DEFAULT_SIZE_CAP, TIE_TOLERANCE,
};
