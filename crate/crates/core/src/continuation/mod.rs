//! Solving, following and checking V-state branches.

pub mod branch;
pub mod newton;
pub mod reduced;
pub mod velocity;

pub use branch::{
    branch_switch, estimate_loop_threshold, hausdorff, trace_loop, Branch, BranchPoint, Termination,
    ThresholdEstimate, TraceOptions,
};
pub use newton::{jacobian_fd, jacobian_rcond, newton_correct, Constraint, Metric, NewtonOptions, NewtonReport};
pub use reduced::{reduced_taylor, ReducedSolution, ReducedSolver, ReducedTaylor};
pub use velocity::velocity_check;
