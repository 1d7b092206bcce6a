//! Differentiable dynamics and cost models.
//!
//! Every model exposes a forward map and a vector-Jacobian product (VJP)
//! with respect to its inputs and its own parameters. The controller's
//! reverse pass is assembled from these VJPs alone.

mod control_weight;
mod linear;
mod mlp;
mod pendulum;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use control_weight::{control_weight_matrix, ControlCostWeight};
pub use linear::{LinearDynamics, QuadraticCost};
pub use mlp::{MlpCost, MlpDynamics};
pub use pendulum::{PendulumTeacherCost, PendulumTeacherDynamics};

use crate::error::{shape_err, PiError, Result};
use crate::linalg::Mat;
use crate::params::{pack_params, unpack_params, ParamVector, Parameterized};
use crate::rng::SeededRng;
use crate::scalar::Real;
use crate::types::{ControlVec, StateVec};

/// Discrete-time dynamics `x' = f(x, v; alpha)`.
pub trait Dynamics<T: Real>: Parameterized<T> + Send + Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn forward(&self, x: &[T], v: &[T], out: &mut [T]);
    /// Accumulates `x_bar += (df/dx)ᵀ cot`, `v_bar += (df/dv)ᵀ cot` and, when
    /// requested, `p_bar += (df/dalpha)ᵀ cot`.
    fn vjp(&self, x: &[T], v: &[T], cot: &[T], x_bar: &mut [T], v_bar: &mut [T], p_bar: Option<&mut [T]>);
    fn spec(&self) -> DynamicsSpec;
    fn boxed_clone(&self) -> Box<dyn Dynamics<T>>;
}

/// A scalar state cost (`q` or `phi`).
pub trait StateCost<T: Real>: Parameterized<T> + Send + Sync {
    fn state_dim(&self) -> usize;
    fn eval(&self, x: &[T]) -> T;
    /// Accumulates `x_bar += cot * dq/dx` and, when requested, `p_bar += cot * dq/dbeta`.
    fn vjp(&self, x: &[T], cot: T, x_bar: &mut [T], p_bar: Option<&mut [T]>);
    fn spec(&self) -> CostSpec;
    fn boxed_clone(&self) -> Box<dyn StateCost<T>>;
}

/// Architecture descriptor stored in checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DynamicsSpec {
    Linear {
        state_dim: usize,
        control_dim: usize,
    },
    /// Pendulum acceleration network with Euler integration.
    Mlp {
        hidden: usize,
        dt: f64,
    },
    PendulumTeacher {
        dt: f64,
        gain: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSpec {
    Quadratic {
        state_dim: usize,
    },
    /// `q = ||net(theta, theta_dot)||^2`.
    Mlp {
        hidden: usize,
        outputs: usize,
    },
    PendulumTeacher,
}

impl DynamicsSpec {
    /// Builds the model with all parameters zero.
    pub fn build<T: Real>(&self) -> Box<dyn Dynamics<T>> {
        match *self {
            DynamicsSpec::Linear { state_dim, control_dim } => Box::new(
                LinearDynamics::new(Mat::zeros(state_dim, state_dim), Mat::zeros(state_dim, control_dim))
                    .expect("shapes agree"),
            ),
            DynamicsSpec::Mlp { hidden, dt } => Box::new(MlpDynamics::new(hidden, T::lit(dt))),
            DynamicsSpec::PendulumTeacher { dt, gain } => {
                Box::new(PendulumTeacherDynamics::new(T::lit(dt), T::lit(gain)))
            }
        }
    }
}

impl CostSpec {
    pub fn build<T: Real>(&self) -> Box<dyn StateCost<T>> {
        match *self {
            CostSpec::Quadratic { state_dim } => {
                Box::new(QuadraticCost::new(Mat::zeros(state_dim, state_dim)).expect("square"))
            }
            CostSpec::Mlp { hidden, outputs } => Box::new(MlpCost::new(hidden, outputs)),
            CostSpec::PendulumTeacher => Box::new(PendulumTeacherCost),
        }
    }
}

/// Terminal cost `phi`: either the running cost itself or a separately
/// parameterised model.
pub enum TerminalCost<T: Real> {
    SameAsRunning,
    Separate(Box<dyn StateCost<T>>),
}

impl<T: Real> Clone for TerminalCost<T> {
    fn clone(&self) -> Self {
        match self {
            TerminalCost::SameAsRunning => TerminalCost::SameAsRunning,
            TerminalCost::Separate(m) => TerminalCost::Separate(m.boxed_clone()),
        }
    }
}

pub const DYNAMICS_ID: &str = "dynamics";
pub const RUNNING_COST_ID: &str = "running_cost";
pub const TERMINAL_COST_ID: &str = "terminal_cost";
pub const CONTROL_WEIGHT_ID: &str = "control_weight";

/// Parameter segments excluded from training.
pub type FreezeSet = BTreeSet<String>;

/// Architecture of a full model bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelsSpec {
    pub dynamics: DynamicsSpec,
    pub running_cost: CostSpec,
    /// `None` when the terminal cost reuses the running cost.
    pub terminal_cost: Option<CostSpec>,
    pub control_dim: usize,
}

/// The models embedded in a path-integral network.
pub struct PiModels<T: Real> {
    pub dynamics: Box<dyn Dynamics<T>>,
    pub running_cost: Box<dyn StateCost<T>>,
    pub terminal_cost: TerminalCost<T>,
    pub control_weight: ControlCostWeight<T>,
}

impl<T: Real> Clone for PiModels<T> {
    fn clone(&self) -> Self {
        Self {
            dynamics: self.dynamics.boxed_clone(),
            running_cost: self.running_cost.boxed_clone(),
            terminal_cost: self.terminal_cost.clone(),
            control_weight: self.control_weight.clone(),
        }
    }
}

impl<T: Real> PiModels<T> {
    pub fn new(
        dynamics: Box<dyn Dynamics<T>>,
        running_cost: Box<dyn StateCost<T>>,
        terminal_cost: TerminalCost<T>,
        control_weight: ControlCostWeight<T>,
    ) -> Result<Self> {
        let n = dynamics.state_dim();
        if running_cost.state_dim() != n {
            return shape_err(format!("running cost expects {} states, dynamics has {n}", running_cost.state_dim()));
        }
        if let TerminalCost::Separate(t) = &terminal_cost {
            if t.state_dim() != n {
                return shape_err("terminal cost state dimension mismatch");
            }
        }
        if control_weight.dim() != dynamics.control_dim() {
            return shape_err(format!(
                "control weight is {}x{0}, dynamics has {} controls",
                control_weight.dim(),
                dynamics.control_dim()
            ));
        }
        Ok(Self { dynamics, running_cost, terminal_cost, control_weight })
    }

    pub fn from_spec(spec: &ModelsSpec) -> Result<Self> {
        let terminal = match spec.terminal_cost {
            None => TerminalCost::SameAsRunning,
            Some(c) => TerminalCost::Separate(c.build()),
        };
        Self::new(
            spec.dynamics.build(),
            spec.running_cost.build(),
            terminal,
            ControlCostWeight::identity(spec.control_dim),
        )
    }

    pub fn spec(&self) -> ModelsSpec {
        ModelsSpec {
            dynamics: self.dynamics.spec(),
            running_cost: self.running_cost.spec(),
            terminal_cost: match &self.terminal_cost {
                TerminalCost::SameAsRunning => None,
                TerminalCost::Separate(t) => Some(t.spec()),
            },
            control_dim: self.control_weight.dim(),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.dynamics.control_dim()
    }

    pub fn terminal(&self) -> &dyn StateCost<T> {
        match &self.terminal_cost {
            TerminalCost::SameAsRunning => self.running_cost.as_ref(),
            TerminalCost::Separate(t) => t.as_ref(),
        }
    }

    pub fn terminal_is_shared(&self) -> bool {
        matches!(self.terminal_cost, TerminalCost::SameAsRunning)
    }

    /// Segment ids in layout order.
    pub fn segment_ids(&self) -> Vec<&'static str> {
        let mut ids = vec![DYNAMICS_ID, RUNNING_COST_ID];
        if !self.terminal_is_shared() {
            ids.push(TERMINAL_COST_ID);
        }
        ids.push(CONTROL_WEIGHT_ID);
        ids
    }

    pub fn pack(&self) -> ParamVector<T> {
        let mut list: Vec<(&str, &dyn Parameterized<T>)> =
            vec![(DYNAMICS_ID, self.dynamics.as_ref()), (RUNNING_COST_ID, self.running_cost.as_ref())];
        if let TerminalCost::Separate(t) = &self.terminal_cost {
            list.push((TERMINAL_COST_ID, t.as_ref()));
        }
        list.push((CONTROL_WEIGHT_ID, &self.control_weight));
        pack_params(&list)
    }

    pub fn unpack(&mut self, pv: &ParamVector<T>) -> Result<()> {
        let mut list: Vec<(&str, &mut dyn Parameterized<T>)> =
            vec![(DYNAMICS_ID, self.dynamics.as_mut()), (RUNNING_COST_ID, self.running_cost.as_mut())];
        if let TerminalCost::Separate(t) = &mut self.terminal_cost {
            list.push((TERMINAL_COST_ID, t.as_mut()));
        }
        list.push((CONTROL_WEIGHT_ID, &mut self.control_weight));
        unpack_params(pv, &mut list)
    }

    /// Number of parameters outside `frozen`.
    pub fn trainable_count(&self, frozen: &FreezeSet) -> usize {
        self.pack().layout().iter().filter(|s| !frozen.contains(&s.id)).map(|s| s.len).sum()
    }
}

/// Checked single evaluation of a dynamics model.
pub fn dynamics_forward<T: Real>(model: &dyn Dynamics<T>, x: &StateVec<T>, v: &ControlVec<T>) -> Result<StateVec<T>> {
    if x.len() != model.state_dim() || v.len() != model.control_dim() {
        return shape_err(format!(
            "model takes ({}, {}) but got ({}, {})",
            model.state_dim(),
            model.control_dim(),
            x.len(),
            v.len()
        ));
    }
    let mut out = vec![T::zero(); x.len()];
    model.forward(x, v, &mut out);
    StateVec::new(out).map_err(|_| PiError::Numeric("dynamics produced a non-finite state".into()))
}

/// `q + ½uᵀRu + ((1 - 1/nu)/2) δuᵀRδu + uᵀRδu`.
pub fn modified_running_cost<T: Real>(q_val: T, u: &[T], du: &[T], r: &Mat<T>, nu: T) -> T {
    let c = T::one() - nu.recip();
    q_val + T::half() * r.bilinear(u, u) + T::half() * c * r.bilinear(du, du) + r.bilinear(u, du)
}

/// Draws `N(0, std^2)` values into `params`.
pub(crate) fn fill_normal<T: Real>(params: &mut [T], rng: &SeededRng, std: T) {
    let mut g = rng.generator();
    for p in params {
        *p = crate::rng::normal(&mut g, T::zero(), std);
    }
}
