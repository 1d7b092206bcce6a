use rayon::prelude::*;

use crate::error::{shape_err, PiError, Result};
use crate::models::{modified_running_cost, PiModels};
use crate::scalar::Real;
use crate::types::{ControlSequence, NoiseTensor};

/// Modified running costs `running[k][i]` and terminal costs `terminal[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutCosts<T> {
    pub trajectories: usize,
    pub horizon: usize,
    pub running: Vec<T>,
    pub terminal: Vec<T>,
}

impl<T: Real> RolloutCosts<T> {
    pub fn new(trajectories: usize, horizon: usize, running: Vec<T>, terminal: Vec<T>) -> Result<Self> {
        if running.len() != trajectories * horizon || terminal.len() != trajectories {
            return shape_err("rollout cost arrays do not match (K, N)");
        }
        Ok(Self { trajectories, horizon, running, terminal })
    }

    pub fn running(&self, k: usize, i: usize) -> T {
        self.running[k * self.horizon + i]
    }
}

/// Simulated states `states[k][i]` (`K x (N+1) x n`) and their costs.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout<T> {
    pub state_dim: usize,
    pub states: Vec<T>,
    pub costs: RolloutCosts<T>,
}

impl<T: Real> Rollout<T> {
    pub fn state(&self, k: usize, i: usize) -> &[T] {
        let start = (k * (self.costs.horizon + 1) + i) * self.state_dim;
        &self.states[start..start + self.state_dim]
    }
}

/// Cost-to-go `S[k][i]` (`K x (N+1)`).
#[derive(Debug, Clone, PartialEq)]
pub struct CostToGo<T> {
    pub trajectories: usize,
    pub horizon: usize,
    pub values: Vec<T>,
}

impl<T: Real> CostToGo<T> {
    pub fn get(&self, k: usize, i: usize) -> T {
        self.values[k * (self.horizon + 1) + i]
    }

    pub fn from_values(trajectories: usize, horizon: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != trajectories * (horizon + 1) {
            return shape_err("cost-to-go array does not match (K, N + 1)");
        }
        Ok(Self { trajectories, horizon, values })
    }
}

/// Simulates the `K` perturbed trajectories from `x0`.
pub fn monte_carlo_rollout<T: Real>(
    x0: &[T],
    useq: &ControlSequence<T>,
    noise: &NoiseTensor<T>,
    models: &PiModels<T>,
    nu: T,
) -> Result<Rollout<T>> {
    let n = models.state_dim();
    let m = models.control_dim();
    let (k_count, horizon) = (noise.trajectories(), noise.horizon());
    if x0.len() != n {
        return shape_err(format!("initial state has {} entries, model expects {n}", x0.len()));
    }
    if useq.dim() != m || noise.dim() != m || useq.horizon() != horizon {
        return shape_err(format!(
            "controls {}x{}, noise {}x{}x{}, model m = {m}",
            useq.horizon(),
            useq.dim(),
            k_count,
            horizon,
            noise.dim()
        ));
    }
    let r = models.control_weight.matrix();
    let terminal = models.terminal();

    let per_traj: Vec<Result<(Vec<T>, Vec<T>, T)>> = (0..k_count)
        .into_par_iter()
        .map(|k| {
            let mut states = Vec::with_capacity((horizon + 1) * n);
            states.extend_from_slice(x0);
            let mut running = Vec::with_capacity(horizon);
            let mut v = vec![T::zero(); m];
            let mut next = vec![T::zero(); n];
            for i in 0..horizon {
                let x = &states[i * n..(i + 1) * n];
                let u = useq.step(i);
                let du = noise.sample(k, i);
                running.push(modified_running_cost(models.running_cost.eval(x), u, du, &r, nu));
                for j in 0..m {
                    v[j] = u[j] + du[j];
                }
                models.dynamics.forward(x, &v, &mut next);
                if next.iter().any(|s| !s.is_finite()) {
                    return Err(PiError::Numeric(format!("trajectory {k} diverged at step {}", i + 1)));
                }
                states.extend_from_slice(&next);
            }
            let term = terminal.eval(&states[horizon * n..]);
            if !term.is_finite() || running.iter().any(|c| !c.is_finite()) {
                return Err(PiError::Numeric(format!("trajectory {k} produced a non-finite cost")));
            }
            Ok((states, running, term))
        })
        .collect();

    let mut states = Vec::with_capacity(k_count * (horizon + 1) * n);
    let mut running = Vec::with_capacity(k_count * horizon);
    let mut terminal_costs = Vec::with_capacity(k_count);
    for item in per_traj {
        let (s, c, t) = item?;
        states.extend(s);
        running.extend(c);
        terminal_costs.push(t);
    }
    Ok(Rollout { state_dim: n, states, costs: RolloutCosts::new(k_count, horizon, running, terminal_costs)? })
}

/// Suffix sums: `S[k][N] = terminal[k]`, `S[k][i] = S[k][i+1] + running[k][i]`.
pub fn cost_to_go<T: Real>(rc: &RolloutCosts<T>) -> CostToGo<T> {
    let (kc, n) = (rc.trajectories, rc.horizon);
    let mut values = vec![T::zero(); kc * (n + 1)];
    for k in 0..kc {
        let row = &mut values[k * (n + 1)..(k + 1) * (n + 1)];
        row[n] = rc.terminal[k];
        for i in (0..n).rev() {
            row[i] = row[i + 1] + rc.running(k, i);
        }
    }
    CostToGo { trajectories: kc, horizon: n, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::models::{ControlCostWeight, LinearDynamics, QuadraticCost, TerminalCost};

    fn scalar_models(f: f64, g: f64) -> PiModels<f64> {
        PiModels::new(
            Box::new(LinearDynamics::new(Mat::from_rows(&[&[f]]).unwrap(), Mat::from_rows(&[&[g]]).unwrap()).unwrap()),
            Box::new(QuadraticCost::new(Mat::from_rows(&[&[1.0]]).unwrap()).unwrap()),
            TerminalCost::SameAsRunning,
            ControlCostWeight::identity(1),
        )
        .unwrap()
    }

    #[test]
    fn hand_rollout() {
        let models = scalar_models(1.0, 1.0);
        let useq = ControlSequence::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        let noise = NoiseTensor::new(1, 2, 1, 0.5, vec![0.5, -0.5]).unwrap();
        let ro = monte_carlo_rollout(&[0.0], &useq, &noise, &models, 1500.0).unwrap();
        assert_eq!(ro.states, vec![0.0, 1.5, 2.0]);
        // q(0) + ½·1 + ((1 - 1/1500)/2)·0.25 + 0.5
        let c0 = 0.5 + 0.5 * (1.0 - 1.0 / 1500.0) * 0.25 + 0.5;
        assert!((ro.costs.running(0, 0) - c0).abs() < 1e-15);
        assert_eq!(ro.costs.terminal[0], 2.0);
    }

    #[test]
    fn identity_dynamics_stay_put() {
        let models = scalar_models(1.0, 0.0);
        let useq = ControlSequence::from_vec(3, 1, vec![4.0, -2.0, 7.0]).unwrap();
        let noise = NoiseTensor::zeros(1, 3, 1, 0.1);
        let ro = monte_carlo_rollout(&[0.7], &useq, &noise, &models, 2.0).unwrap();
        assert!(ro.states.iter().all(|&s| s == 0.7));
    }

    #[test]
    fn identical_noise_rows_identical_trajectories() {
        let models = scalar_models(0.9, 0.4);
        let useq = ControlSequence::from_vec(3, 1, vec![0.1, 0.2, 0.3]).unwrap();
        let noise = NoiseTensor::new(2, 3, 1, 0.1, vec![0.05, -0.1, 0.2, 0.05, -0.1, 0.2]).unwrap();
        let ro = monte_carlo_rollout(&[1.0], &useq, &noise, &models, 3.0).unwrap();
        for i in 0..4 {
            assert_eq!(ro.state(0, i), ro.state(1, i));
        }
        assert_eq!(ro.costs.terminal[0], ro.costs.terminal[1]);
    }

    #[test]
    fn divergence_names_trajectory() {
        let models = scalar_models(1e300, 1.0);
        let useq = ControlSequence::zeros(3, 1);
        let noise = NoiseTensor::new(2, 3, 1, 0.1, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let err = monte_carlo_rollout(&[1e300], &useq, &noise, &models, 3.0).unwrap_err();
        assert!(matches!(err, PiError::Numeric(ref s) if s.contains("trajectory 0")), "{err}");
    }

    #[test]
    fn shape_errors() {
        let models = scalar_models(1.0, 1.0);
        let noise = NoiseTensor::zeros(1, 3, 1, 0.1);
        assert!(monte_carlo_rollout(&[0.0, 1.0], &ControlSequence::zeros(3, 1), &noise, &models, 2.0).is_err());
        assert!(monte_carlo_rollout(&[0.0], &ControlSequence::zeros(2, 1), &noise, &models, 2.0).is_err());
    }

    #[test]
    fn suffix_sums() {
        let rc = RolloutCosts::new(1, 3, vec![1.0, 2.0, 3.0], vec![4.0]).unwrap();
        assert_eq!(cost_to_go(&rc).values, vec![10.0, 9.0, 7.0, 4.0]);
        let zero = RolloutCosts::new(2, 2, vec![0.0; 4], vec![0.0; 2]).unwrap();
        assert!(cost_to_go(&zero).values.iter().all(|&v| v == 0.0));
        let one = RolloutCosts::new(1, 1, vec![2.5], vec![1.5]).unwrap();
        assert_eq!(cost_to_go(&one).values, vec![4.0, 1.5]);
    }

    proptest::proptest! {
        #[test]
        fn suffix_recurrence_exact(running in proptest::collection::vec(-1e3f64..1e3, 12), terminal in proptest::collection::vec(-1e3f64..1e3, 3)) {
            let rc = RolloutCosts::new(3, 4, running, terminal).unwrap();
            let s = cost_to_go(&rc);
            for k in 0..3 {
                proptest::prop_assert_eq!(s.get(k, 4), rc.terminal[k]);
                for i in 0..4 {
                    proptest::prop_assert_eq!(s.get(k, i), s.get(k, i + 1) + rc.running(k, i));
                }
            }
        }
    }
}
