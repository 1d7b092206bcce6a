use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envs::{mpc_simulate, pendulum_initial_states, IlqrMpc, LinearTeacher, PendulumTask};
use crate::error::{PiError, Result};
use crate::experts::{lqr_solve, IlqrSettings};
use crate::rng::{standard_normal, SeededRng};
use crate::scalar::Real;
use crate::types::ControlSequence;

/// An initial state and the expert's open-loop plan from it.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenLoopSample<T> {
    pub x0: Vec<T>,
    pub controls: ControlSequence<T>,
}

/// One closed-loop transition of an expert trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcSample<T> {
    pub x: Vec<T>,
    pub u: Vec<T>,
    pub x_next: Vec<T>,
}

/// LQR demonstrations from `x0 ~ N(0, I)`. Train sample `j` draws from
/// `rng.substream(0).substream(j)`, test sample `j` from
/// `rng.substream(1).substream(j)`.
pub fn build_linear_dataset<T: Real>(
    teacher: &LinearTeacher<T>,
    rng: &SeededRng,
    n_train: usize,
    n_test: usize,
    horizon: usize,
) -> Result<(Vec<OpenLoopSample<T>>, Vec<OpenLoopSample<T>>)> {
    let problem = teacher.lqr_problem(horizon)?;
    let n = problem.state_dim();
    let make = |split: u64, count: usize| -> Result<Vec<OpenLoopSample<T>>> {
        (0..count)
            .map(|j| {
                let mut g = rng.substream(split).substream(j as u64).generator();
                let x0: Vec<T> = (0..n).map(|_| standard_normal(&mut g)).collect();
                let controls = lqr_solve(&problem, &x0)?;
                Ok(OpenLoopSample { x0, controls })
            })
            .collect()
    };
    Ok((make(0, n_train)?, make(1, n_test)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PendulumDataConfig {
    pub n_train: usize,
    pub n_test: usize,
    /// Control intervals per trajectory.
    pub steps: usize,
    pub horizon: usize,
    pub warm_start: bool,
    pub ilqr: IlqrSettings,
}

impl Default for PendulumDataConfig {
    fn default() -> Self {
        Self { n_train: 50, n_test: 10, steps: 400, horizon: 30, warm_start: true, ilqr: IlqrSettings::default() }
    }
}

/// A closed-loop expert run.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration<T> {
    pub states: Vec<Vec<T>>,
    pub controls: Vec<Vec<T>>,
    pub success: bool,
    pub cost: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PendulumDemos<T> {
    pub train: Vec<Demonstration<T>>,
    pub test: Vec<Demonstration<T>>,
    /// Runs dropped because the plant or the expert diverged.
    pub excluded: usize,
}

/// iLQR MPC demonstrations on the teacher pendulum. Initial states of the
/// train and test runs come from `rng.substream(0)` and `rng.substream(1)`.
pub fn build_pendulum_demos<T: Real>(rng: &SeededRng, cfg: &PendulumDataConfig) -> Result<PendulumDemos<T>> {
    let task = PendulumTask::<T>::default();
    let run = |x0: &[T; 2]| -> Result<Demonstration<T>> {
        let mut expert = IlqrMpc { problem: &task, horizon: cfg.horizon, settings: cfg.ilqr, cold_control: T::zero() };
        let res = mpc_simulate(&mut expert, &task, x0, cfg.steps, cfg.warm_start)?;
        Ok(Demonstration { states: res.states, controls: res.controls, success: res.success, cost: res.cost })
    };
    let mut excluded = 0;
    let mut split = |tag: u64, count: usize| -> Result<Vec<Demonstration<T>>> {
        let starts = pendulum_initial_states::<T>(&rng.substream(tag), count);
        let runs: Vec<Result<Demonstration<T>>> = starts.par_iter().map(run).collect();
        let mut kept = Vec::with_capacity(count);
        for (j, r) in runs.into_iter().enumerate() {
            match r {
                Ok(d) => kept.push(d),
                Err(PiError::Numeric(msg)) => {
                    log::warn!("demonstration {j} of split {tag} excluded: {msg}");
                    excluded += 1;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(kept)
    };
    let train = split(0, cfg.n_train)?;
    let test = split(1, cfg.n_test)?;
    if excluded > 0 {
        log::warn!("{excluded} divergent demonstrations excluded");
    }
    Ok(PendulumDemos { train, test, excluded })
}

/// Consecutive-transition samples of every demonstration, in order.
pub fn transitions<T: Real>(demos: &[Demonstration<T>]) -> Vec<MpcSample<T>> {
    demos
        .iter()
        .flat_map(|d| {
            d.controls.iter().enumerate().map(move |(i, u)| MpcSample {
                x: d.states[i].clone(),
                u: u.clone(),
                x_next: d.states[i + 1].clone(),
            })
        })
        .collect()
}
