//! The belief-augmented endogenous grid solver.

mod egm;
mod grid;
mod policy;

pub use egm::{
    egm_step, euler_rhs, euler_rhs_on_grid, iterate, policy_deltas, solve, ConvergenceReport, Problem,
    Transition,
};
pub use grid::{build_linear_savings_grid, build_savings_grid, curvature, SavingsGrid};
pub use policy::{ConsumptionRule, PolicyTable};
