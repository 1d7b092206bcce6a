//! Imitation learning: losses, optimiser, demonstration datasets, dynamics
//! pre-training and end-to-end training of the path-integral network.

mod dataset;
mod losses;
mod optim;
mod pinet;
mod pretrain;

pub use dataset::{
    build_linear_dataset, build_pendulum_demos, transitions, Demonstration, MpcSample, OpenLoopSample,
    PendulumDataConfig, PendulumDemos,
};
pub use losses::{
    loss_cost, loss_cost_grad, loss_ctrl, loss_ctrl_first, loss_ctrl_first_grad, loss_ctrl_grad, loss_dyn,
    loss_dyn_grad, state_residual,
};
pub use optim::{lr_plateau_schedule, rmsprop_step, OptimizerConfig, OptimizerState};
pub use pinet::{
    batch_gradient, check_memory_budget, evaluate_pinet, train_pinet, EpochRecord, EvalLosses, LossWeights, Regime,
    TrainConfig, TrainData, TrainOutcome,
};
pub use pretrain::{pretrain_dynamics, PretrainConfig, PretrainRecord, PretrainReport};
