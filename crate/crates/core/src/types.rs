//! Domain value types shared across the controller, experts and training.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{param_err, shape_err, PiError, Result};
use crate::scalar::Real;

fn check_finite<T: Real>(what: &str, v: &[T]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(PiError::Numeric(format!("{what} entry {i} is not finite"))),
        None => Ok(()),
    }
}

/// System state `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVec<T>(Vec<T>);

impl<T: Real> StateVec<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return shape_err("state dimension must be at least 1");
        }
        check_finite("state", &values)?;
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n.max(1)])
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> Deref for StateVec<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// Control input `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlVec<T>(Vec<T>);

impl<T: Real> ControlVec<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return shape_err("control dimension must be at least 1");
        }
        check_finite("control", &values)?;
        Ok(Self(values))
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> Deref for ControlVec<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// An `N x m` plan of controls, row `i` applied at step `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSequence<T> {
    horizon: usize,
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> ControlSequence<T> {
    pub fn zeros(horizon: usize, dim: usize) -> Self {
        Self::filled(horizon, dim, T::zero())
    }

    pub fn filled(horizon: usize, dim: usize, value: T) -> Self {
        Self { horizon, dim, data: vec![value; horizon * dim] }
    }

    pub fn from_vec(horizon: usize, dim: usize, data: Vec<T>) -> Result<Self> {
        if horizon == 0 || dim == 0 {
            return shape_err(format!("control sequence needs N >= 1 and m >= 1, got {horizon}x{dim}"));
        }
        if data.len() != horizon * dim {
            return shape_err(format!("{} values for a {horizon}x{dim} control sequence", data.len()));
        }
        check_finite("control sequence", &data)?;
        Ok(Self { horizon, dim, data })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn step_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Drops the first control and appends a zero control (warm start).
    pub fn shifted(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        data.extend_from_slice(&self.data[self.dim..]);
        data.extend(std::iter::repeat_n(T::zero(), self.dim));
        Self { horizon: self.horizon, dim: self.dim, data }
    }
}

/// `K x N x m` perturbations with per-component standard deviation `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseTensor<T> {
    trajectories: usize,
    horizon: usize,
    dim: usize,
    sigma: T,
    data: Vec<T>,
}

impl<T: Real> NoiseTensor<T> {
    pub fn new(trajectories: usize, horizon: usize, dim: usize, sigma: T, data: Vec<T>) -> Result<Self> {
        if data.len() != trajectories * horizon * dim {
            return shape_err(format!("{} noise values for shape ({trajectories}, {horizon}, {dim})", data.len()));
        }
        if !(sigma > T::zero()) {
            return param_err("noise sigma must be positive");
        }
        Ok(Self { trajectories, horizon, dim, sigma, data })
    }

    pub fn zeros(trajectories: usize, horizon: usize, dim: usize, sigma: T) -> Self {
        Self { trajectories, horizon, dim, sigma, data: vec![T::zero(); trajectories * horizon * dim] }
    }

    pub fn trajectories(&self) -> usize {
        self.trajectories
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn sample(&self, k: usize, i: usize) -> &[T] {
        let start = (k * self.horizon + i) * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn sample_mut(&mut self, k: usize, i: usize) -> &mut [T] {
        let start = (k * self.horizon + i) * self.dim;
        &mut self.data[start..start + self.dim]
    }

    pub fn trajectory(&self, k: usize) -> &[T] {
        let len = self.horizon * self.dim;
        &self.data[k * len..(k + 1) * len]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

/// Path-integral hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiHyperParams<T> {
    /// Softmax temperature.
    pub lambda: T,
    /// Scales the `δuᵀRδu` term by `(1 - 1/nu)`.
    pub nu: T,
    pub sigma: T,
    /// Number of sampled trajectories `K`.
    pub trajectories: usize,
    /// Planning horizon `N`.
    pub horizon: usize,
    /// Kernel recurrence count `U`.
    pub iterations: usize,
}

impl<T: Real> PiHyperParams<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("nu", self.nu), ("sigma", self.sigma)] {
            if !(v > T::zero()) || !v.is_finite() {
                return param_err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        for (name, v) in
            [("trajectories", self.trajectories), ("horizon", self.horizon), ("iterations", self.iterations)]
        {
            if v == 0 {
                return param_err(format!("{name} must be at least 1"));
            }
        }
        Ok(())
    }

    /// `(1 - 1/nu)`, the coefficient of the noise quadratic term.
    pub fn noise_cost_coeff(&self) -> T {
        T::one() - self.nu.recip()
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }
}
