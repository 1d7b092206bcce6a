use super::{CostSpec, Dynamics, DynamicsSpec, StateCost};
use crate::envs::{teacher_cost, teacher_cost_grad, Pendulum};
use crate::params::Parameterized;
use crate::scalar::Real;

/// Ground-truth pendulum dynamics as a parameter-free differentiable model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumTeacherDynamics<T> {
    plant: Pendulum<T>,
}

impl<T: Real> PendulumTeacherDynamics<T> {
    pub fn new(dt: T, gain: T) -> Self {
        Self { plant: Pendulum::new(dt, gain) }
    }
}

impl<T: Real> Default for PendulumTeacherDynamics<T> {
    fn default() -> Self {
        Self { plant: Pendulum::default() }
    }
}

impl<T: Real> Parameterized<T> for PendulumTeacherDynamics<T> {
    fn param_count(&self) -> usize {
        0
    }
    fn write_params(&self, _out: &mut [T]) {}
    fn read_params(&mut self, _src: &[T]) {}
}

impl<T: Real> Dynamics<T> for PendulumTeacherDynamics<T> {
    fn state_dim(&self) -> usize {
        2
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn forward(&self, x: &[T], v: &[T], out: &mut [T]) {
        let y = self.plant.step([x[0], x[1]], v[0]);
        out[..2].copy_from_slice(&y);
    }

    fn vjp(&self, x: &[T], v: &[T], cot: &[T], x_bar: &mut [T], v_bar: &mut [T], _p_bar: Option<&mut [T]>) {
        let (a, b) = self.plant.jacobians([x[0], x[1]], v[0]);
        a.tr_mul_vec_acc(cot, x_bar);
        b.tr_mul_vec_acc(cot, v_bar);
    }

    fn spec(&self) -> DynamicsSpec {
        DynamicsSpec::PendulumTeacher { dt: self.plant.dt.to_f64_lossy(), gain: self.plant.gain.to_f64_lossy() }
    }

    fn boxed_clone(&self) -> Box<dyn Dynamics<T>> {
        Box::new(*self)
    }
}

/// `(1 + cos theta)^2 + theta_dot^2`, used for both running and terminal cost.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PendulumTeacherCost;

impl<T: Real> Parameterized<T> for PendulumTeacherCost {
    fn param_count(&self) -> usize {
        0
    }
    fn write_params(&self, _out: &mut [T]) {}
    fn read_params(&mut self, _src: &[T]) {}
}

impl<T: Real> StateCost<T> for PendulumTeacherCost {
    fn state_dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &[T]) -> T {
        teacher_cost(x)
    }

    fn vjp(&self, x: &[T], cot: T, x_bar: &mut [T], _p_bar: Option<&mut [T]>) {
        let g = teacher_cost_grad(x);
        x_bar[0] += cot * g[0];
        x_bar[1] += cot * g[1];
    }

    fn spec(&self) -> CostSpec {
        CostSpec::PendulumTeacher
    }

    fn boxed_clone(&self) -> Box<dyn StateCost<T>> {
        Box::new(*self)
    }
}
