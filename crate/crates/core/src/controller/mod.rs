//! Path-integral control: one kernel pass (noise, Monte-Carlo rollout,
//! cost-to-go, softmax update), its unrolled recurrence, and the exact
//! reverse pass through that recurrence.

mod backward;
mod gradcheck;
mod network;
mod rollout;
mod update;

pub use backward::pi_net_backward;
pub use gradcheck::{
    compare as compare_gradients, finite_difference_gradient, gradcheck, tiny_instance, GradcheckReport, SegmentCheck,
};
pub use network::{pi_kernel, pi_net_forward, KernelRecord, RolloutTape};
pub use rollout::{cost_to_go, monte_carlo_rollout, CostToGo, Rollout, RolloutCosts};
pub use update::{update_controls, update_controls_weighted};

use crate::scalar::Real;
use crate::types::PiHyperParams;

/// Bytes held by a recorded forward pass for one sample.
pub fn tape_bytes<T: Real>(hp: &PiHyperParams<T>, state_dim: usize, control_dim: usize) -> u64 {
    let (k, n, u) = (hp.trajectories as u64, hp.horizon as u64, hp.iterations as u64);
    let (sd, cd) = (state_dim as u64, control_dim as u64);
    let per_iter = k * (n + 1) * sd // states
        + k * n * cd // noise
        + k * n // weights
        + k * (n + 1) // running + terminal costs
        + n * cd; // input sequence
    per_iter * u * std::mem::size_of::<T>() as u64
}
