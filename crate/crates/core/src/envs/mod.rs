//! Benchmark systems, closed-loop MPC simulation and evaluation metrics.

mod linear;
mod metrics;
mod mpc;
mod pendulum;

pub use linear::{
    initial_linear_models, one_step_relative_error, sample_linear_teacher, LinearTeacher, LINEAR_CONTROL_DIM,
    LINEAR_DT, LINEAR_STATE_DIM,
};
pub use metrics::{success_metric, trajectory_cost, SUCCESS_THRESHOLD, SUCCESS_WINDOW};
pub use mpc::{mpc_simulate, write_trajectory_csv, IlqrMpc, LqrMpc, MpcController, PiMpc, Plant, SimulationResult};
pub use pendulum::{
    distance_from_upright, pendulum_initial_states, pendulum_step, pendulum_teacher_models, teacher_cost,
    teacher_cost_grad, teacher_cost_hessian, Pendulum, PendulumTask, PENDULUM_DT, PENDULUM_GAIN, PENDULUM_R,
};
