//! Path-integral model predictive control as a differentiable unrolled
//! network, with LQR/iLQR experts, benchmark systems and an imitation
//! learning harness.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

// `!(a > b)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod envs;
pub mod error;
pub mod experts;
pub mod linalg;
pub mod models;
pub mod params;
pub mod rng;
pub mod scalar;
pub mod training;
pub mod types;

pub use error::{PiError, Result};
pub use rng::SeededRng;
pub use scalar::Real;

pub type Matrix = linalg::Mat<f64>;
pub type State = types::StateVec<f64>;
pub type Control = types::ControlVec<f64>;
pub type Controls = types::ControlSequence<f64>;
pub type Noise = types::NoiseTensor<f64>;
pub type HyperParams = types::PiHyperParams<f64>;
pub type Params = params::ParamVector<f64>;
pub type Models = models::PiModels<f64>;
pub type Tape = controller::RolloutTape<f64>;
