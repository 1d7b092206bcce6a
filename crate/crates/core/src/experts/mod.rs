//! Optimal-control demonstrators: finite-horizon LQR and iLQR.

mod ilqr;
mod lqr;

pub use ilqr::{ilqr_solve, total_cost, IlqrProblem, IlqrResult, IlqrSettings};
pub use lqr::{lqr_gains, lqr_objective, lqr_rollout, lqr_solve, LqrProblem};
