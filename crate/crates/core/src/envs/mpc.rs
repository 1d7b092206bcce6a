use std::io::Write;
use std::time::Instant;

use crate::controller::pi_net_forward;
use crate::error::{param_err, PiError, Result};
use crate::experts::{ilqr_solve, lqr_solve, IlqrProblem, IlqrSettings, LqrProblem};
use crate::linalg::Mat;
use crate::models::PiModels;
use crate::rng::SeededRng;
use crate::scalar::Real;
use crate::types::{ControlSequence, PiHyperParams};

use super::metrics::trajectory_cost;

/// The real system a controller acts on.
pub trait Plant<T: Real>: Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn dt(&self) -> T;
    fn step(&self, x: &[T], u: &[T]) -> Vec<T>;
    /// Teacher running cost; also used as the terminal cost.
    fn state_cost(&self, x: &[T]) -> T;
    fn control_weight(&self) -> &Mat<T>;
    fn success(&self, _states: &[Vec<T>]) -> bool {
        false
    }
}

/// A receding-horizon planner.
pub trait MpcController<T: Real> {
    fn horizon(&self) -> usize;
    /// Plans from `x` at simulation step `step`. `warm` is the previous plan
    /// shifted by one step, or `None` for a cold start.
    fn plan(&mut self, x: &[T], step: usize, warm: Option<&ControlSequence<T>>) -> Result<ControlSequence<T>>;
}

/// iLQR re-solved at every step.
pub struct IlqrMpc<'a, T: Real> {
    pub problem: &'a dyn IlqrProblem<T>,
    pub horizon: usize,
    pub settings: IlqrSettings,
    /// Constant control of the cold-start plan. Nonzero to leave the
    /// stationary point of a plan that starts at rest.
    pub cold_control: T,
}

impl<T: Real> MpcController<T> for IlqrMpc<'_, T> {
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn plan(&mut self, x: &[T], step: usize, warm: Option<&ControlSequence<T>>) -> Result<ControlSequence<T>> {
        let cold;
        let init = match warm {
            Some(w) => w,
            None => {
                cold = ControlSequence::filled(self.horizon, self.problem.control_dim(), self.cold_control);
                &cold
            }
        };
        let res = ilqr_solve(self.problem, x, init, &self.settings)?;
        if res.degraded {
            log::debug!("iLQR degraded at step {step}, cost {}", res.cost);
        }
        Ok(res.controls)
    }
}

/// Finite-horizon LQR re-solved at every step.
pub struct LqrMpc<T> {
    pub problem: LqrProblem<T>,
}

impl<T: Real> MpcController<T> for LqrMpc<T> {
    fn horizon(&self) -> usize {
        self.problem.horizon
    }

    fn plan(&mut self, x: &[T], _step: usize, _warm: Option<&ControlSequence<T>>) -> Result<ControlSequence<T>> {
        lqr_solve(&self.problem, x)
    }
}

/// The path-integral network used as an MPC policy.
pub struct PiMpc<'a, T: Real> {
    pub models: &'a PiModels<T>,
    pub hp: PiHyperParams<T>,
    /// Kernel iterations when a warm plan is supplied.
    pub warm_iterations: usize,
    /// Step `j` uses `rng.substream(j)`.
    pub rng: SeededRng,
}

impl<T: Real> MpcController<T> for PiMpc<'_, T> {
    fn horizon(&self) -> usize {
        self.hp.horizon
    }

    fn plan(&mut self, x: &[T], step: usize, warm: Option<&ControlSequence<T>>) -> Result<ControlSequence<T>> {
        let rng = self.rng.substream(step as u64);
        match warm {
            Some(w) => {
                let hp = self.hp.with_iterations(self.warm_iterations);
                pi_net_forward(x, w, self.models, &hp, &rng, false).map(|r| r.0)
            }
            None => {
                let init = ControlSequence::zeros(self.hp.horizon, self.models.control_dim());
                pi_net_forward(x, &init, self.models, &self.hp, &rng, false).map(|r| r.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult<T> {
    pub times: Vec<T>,
    /// `steps + 1` states.
    pub states: Vec<Vec<T>>,
    /// `steps` applied controls.
    pub controls: Vec<Vec<T>>,
    pub success: bool,
    pub cost: T,
    /// Seconds; informational only.
    pub wall_time: f64,
}

/// Closed-loop simulation for `steps` control intervals: plan, apply the
/// first control, advance the plant. With `warm_start` each plan after the
/// first is seeded by the previous one shifted left.
pub fn mpc_simulate<T: Real>(
    controller: &mut dyn MpcController<T>,
    plant: &dyn Plant<T>,
    x0: &[T],
    steps: usize,
    warm_start: bool,
) -> Result<SimulationResult<T>> {
    if x0.len() != plant.state_dim() {
        return param_err(format!("initial state has {} entries, plant has {}", x0.len(), plant.state_dim()));
    }
    if steps > 0 && controller.horizon() > steps {
        return param_err(format!("controller horizon {} exceeds the {steps}-step run", controller.horizon()));
    }
    let start = Instant::now();
    let dt = plant.dt();
    let mut states = vec![x0.to_vec()];
    let mut controls = Vec::with_capacity(steps);
    let mut prev: Option<ControlSequence<T>> = None;
    for i in 0..steps {
        let x = &states[i];
        let warm = if warm_start { prev.as_ref().map(ControlSequence::shifted) } else { None };
        let plan = controller.plan(x, i, warm.as_ref())?;
        let u = plan.step(0).to_vec();
        if u.iter().any(|v| !v.is_finite()) {
            return Err(PiError::Numeric(format!("controller returned a non-finite control at step {i}")));
        }
        let next = plant.step(x, &u);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(PiError::Numeric(format!("plant diverged at step {}", i + 1)));
        }
        controls.push(u);
        states.push(next);
        prev = Some(plan);
    }
    let times = (0..states.len()).map(|i| T::lit(i as f64) * dt).collect();
    let cost =
        trajectory_cost(&states, &controls, |x| plant.state_cost(x), |x| plant.state_cost(x), plant.control_weight());
    let success = steps > 0 && plant.success(&states);
    Ok(SimulationResult { times, states, controls, success, cost, wall_time: start.elapsed().as_secs_f64() })
}

/// CSV with columns `time, x0.., u0.., cost`; `cost` is the instantaneous
/// teacher state cost. The last row has empty control fields.
pub fn write_trajectory_csv<T: Real, W: Write>(
    out: &mut W,
    result: &SimulationResult<T>,
    plant: &dyn Plant<T>,
) -> std::io::Result<()> {
    let (n, m) = (plant.state_dim(), plant.control_dim());
    let mut header = vec!["time".to_string()];
    header.extend((0..n).map(|j| format!("x{j}")));
    header.extend((0..m).map(|j| format!("u{j}")));
    header.push("cost".into());
    writeln!(out, "{}", header.join(","))?;
    for (i, x) in result.states.iter().enumerate() {
        let mut row = vec![result.times[i].to_string()];
        row.extend(x.iter().map(|v| v.to_string()));
        match result.controls.get(i) {
            Some(u) => row.extend(u.iter().map(|v| v.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), m)),
        }
        row.push(plant.state_cost(x).to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::PendulumTask;
    use std::f64::consts::PI;

    struct Zero;

    impl MpcController<f64> for Zero {
        fn horizon(&self) -> usize {
            5
        }
        fn plan(
            &mut self,
            _x: &[f64],
            _step: usize,
            _warm: Option<&ControlSequence<f64>>,
        ) -> Result<ControlSequence<f64>> {
            Ok(ControlSequence::zeros(5, 1))
        }
    }

    #[test]
    fn zero_duration() {
        let task = PendulumTask::default();
        let r = mpc_simulate(&mut Zero, &task, &[PI, 0.0], 0, true).unwrap();
        assert_eq!(r.states.len(), 1);
        assert!(r.controls.is_empty() && !r.success);
    }

    #[test]
    fn length_and_success_at_rest_upright() {
        let task = PendulumTask::default();
        let r = mpc_simulate(&mut Zero, &task, &[PI, 0.0], 60, false).unwrap();
        assert_eq!(r.states.len(), 61);
        assert!(r.success);
        assert!(r.cost < 1e-20);
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &r, &task).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 62);
        assert!(text.starts_with("time,x0,x1,u0,cost\n"));
    }

    #[test]
    fn horizon_longer_than_run_rejected() {
        let task = PendulumTask::default();
        assert!(matches!(mpc_simulate(&mut Zero, &task, &[0.0, 0.0], 3, false), Err(PiError::Parameter(_))));
    }

    #[test]
    fn divergence_reports_step() {
        struct Huge;
        impl MpcController<f64> for Huge {
            fn horizon(&self) -> usize {
                1
            }
            fn plan(
                &mut self,
                _x: &[f64],
                _step: usize,
                _w: Option<&ControlSequence<f64>>,
            ) -> Result<ControlSequence<f64>> {
                Ok(ControlSequence::filled(1, 1, f64::MAX))
            }
        }
        let task = PendulumTask::default();
        let err = mpc_simulate(&mut Huge, &task, &[0.0, 0.0], 4, false).unwrap_err();
        assert!(matches!(err, PiError::Numeric(ref s) if s.contains("step 1")), "{err:?}");
    }
}
