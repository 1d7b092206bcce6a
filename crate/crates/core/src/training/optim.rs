use serde::{Deserialize, Serialize};

use crate::error::{param_err, shape_err, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub decay: f64,
    pub epsilon: f64,
    /// Non-improving epochs tolerated before the learning rate is cut.
    pub patience: usize,
    pub factor: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { lr: 1e-3, decay: 0.9, epsilon: 1e-8, patience: 5, factor: 0.5 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !(0.0..1.0).contains(&self.decay) || !(self.epsilon > 0.0) {
            return param_err("optimizer needs lr > 0, decay in [0, 1) and epsilon > 0");
        }
        if self.patience == 0 || !(self.factor > 0.0 && self.factor < 1.0) {
            return param_err("plateau schedule needs patience >= 1 and factor in (0, 1)");
        }
        Ok(())
    }
}

/// RMSProp accumulators plus the plateau-schedule bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    pub accum: Vec<f64>,
    pub lr: f64,
    pub since_improvement: usize,
    pub best: Option<f64>,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, param_count: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, accum: vec![0.0; param_count], lr: config.lr, since_improvement: 0, best: None })
    }
}

/// `v <- decay v + (1 - decay) g²`, `p <- p - lr g / (sqrt(v) + eps)`.
/// Coordinates with `trainable[i] == false` are left untouched, accumulator
/// included.
pub fn rmsprop_step<T: Real>(
    params: &mut [T],
    grads: &[T],
    st: &mut OptimizerState,
    trainable: Option<&[bool]>,
) -> Result<()> {
    if params.len() != grads.len()
        || params.len() != st.accum.len()
        || trainable.is_some_and(|t| t.len() != params.len())
    {
        return shape_err(format!(
            "rmsprop: {} params, {} grads, {} accumulators",
            params.len(),
            grads.len(),
            st.accum.len()
        ));
    }
    let OptimizerConfig { decay, epsilon, .. } = st.config;
    for i in 0..params.len() {
        if trainable.is_some_and(|t| !t[i]) {
            continue;
        }
        let g = grads[i].to_f64_lossy();
        let v = decay * st.accum[i] + (1.0 - decay) * g * g;
        st.accum[i] = v;
        params[i] -= T::lit(st.lr * g / (v.sqrt() + epsilon));
    }
    Ok(())
}

/// Records one epoch's loss. A strict improvement on the best loss resets
/// the counter; `patience` epochs without one halve the rate (by `factor`)
/// and reset it. Returns whether the rate was cut.
pub fn lr_plateau_schedule(st: &mut OptimizerState, epoch_loss: f64) -> bool {
    if st.best.is_none_or(|b| epoch_loss < b) {
        st.best = Some(epoch_loss);
        st.since_improvement = 0;
        return false;
    }
    st.since_improvement += 1;
    if st.since_improvement >= st.config.patience {
        st.lr *= st.config.factor;
        st.since_improvement = 0;
        return true;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(n: usize) -> OptimizerState {
        OptimizerState::new(OptimizerConfig::default(), n).unwrap()
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut st = state(3);
        st.accum = vec![0.5, 0.0, 2.0];
        let mut p = [1.0, -2.0, 3.5];
        rmsprop_step(&mut p, &[0.0; 3], &mut st, None).unwrap();
        assert_eq!(p, [1.0, -2.0, 3.5]);
    }

    #[test]
    fn one_step_arithmetic() {
        let mut st = state(1);
        let mut p = [0.0f64];
        rmsprop_step(&mut p, &[1.0], &mut st, None).unwrap();
        let expected = -1e-3 / (0.1f64.sqrt() + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15 * expected.abs());
    }

    #[test]
    fn frozen_coordinates_untouched() {
        let mut st = state(2);
        let mut p = [1.0, 1.0];
        rmsprop_step(&mut p, &[1.0, 1.0], &mut st, Some(&[false, true])).unwrap();
        assert_eq!(p[0], 1.0);
        assert_eq!(st.accum[0], 0.0);
        assert!(p[1] < 1.0);
    }

    #[test]
    fn quadratic_descent_is_monotone() {
        let mut st = state(1);
        let mut p = [3.0f64];
        let mut prev = f64::INFINITY;
        for _ in 0..100 {
            let loss = p[0] * p[0];
            assert!(loss < prev);
            prev = loss;
            let g = [2.0 * p[0]];
            rmsprop_step(&mut p, &g, &mut st, None).unwrap();
        }
    }

    #[test]
    fn plateau_halves_after_five() {
        let mut st = state(0);
        assert!(!lr_plateau_schedule(&mut st, 1.0));
        for i in 0..4 {
            assert!(!lr_plateau_schedule(&mut st, 1.0), "epoch {i}");
        }
        assert!(lr_plateau_schedule(&mut st, 1.5));
        assert_eq!(st.lr, 5e-4);
        for _ in 0..5 {
            lr_plateau_schedule(&mut st, 1.0);
        }
        assert_eq!(st.lr, 2.5e-4);
    }

    #[test]
    fn alternating_never_decays() {
        let mut st = state(0);
        let mut loss = 10.0;
        for i in 0..40 {
            if i % 2 == 0 {
                loss -= 0.1;
                lr_plateau_schedule(&mut st, loss);
            } else {
                lr_plateau_schedule(&mut st, loss + 1.0);
            }
        }
        assert_eq!(st.lr, 1e-3);
    }
}
