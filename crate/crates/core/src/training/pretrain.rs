use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, PiError, Result};
use crate::models::Dynamics;
use crate::rng::SeededRng;
use crate::scalar::Real;

use super::dataset::MpcSample;
use super::losses::{loss_dyn, loss_dyn_grad};
use super::optim::{lr_plateau_schedule, rmsprop_step, OptimizerConfig, OptimizerState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch: usize,
    /// Compare the first state component on the circle.
    pub wrap_angle: bool,
    pub optimizer: OptimizerConfig,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self { epochs: 200, batch: 32, wrap_angle: true, optimizer: OptimizerConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train: f64,
    pub test: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    /// Final full-pass losses; `None` when there was nothing to evaluate.
    pub train_loss: Option<f64>,
    pub test_loss: Option<f64>,
    pub history: Vec<PretrainRecord>,
}

fn chunk_grad<T: Real>(f: &dyn Dynamics<T>, chunk: &[MpcSample<T>], wrap: bool, len: usize) -> Result<Vec<T>> {
    let mut g = vec![T::zero(); len];
    loss_dyn_grad(f, chunk, wrap, &mut g)?;
    Ok(g)
}

/// Minimises the one-step prediction loss with RMSProp and the plateau
/// schedule (driven by the full training loss). Epoch `e` shuffles with
/// `rng.substream(e)`.
pub fn pretrain_dynamics<T: Real>(
    f: &mut dyn Dynamics<T>,
    train: &[MpcSample<T>],
    test: &[MpcSample<T>],
    cfg: &PretrainConfig,
    rng: &SeededRng,
) -> Result<PretrainReport> {
    if train.is_empty() {
        return param_err("pre-training needs at least one transition");
    }
    if cfg.batch == 0 {
        return param_err("batch size must be at least 1");
    }
    let p = f.param_count();
    let mut st = OptimizerState::new(cfg.optimizer, p)?;
    let mut params = vec![T::zero(); p];
    f.write_params(&mut params);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    // per-thread chunks of a batch, reduced in order
    let sub = 64;
    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng.substream(epoch as u64).generator());
        for batch_idx in order.chunks(cfg.batch) {
            let batch: Vec<MpcSample<T>> = batch_idx.iter().map(|&i| train[i].clone()).collect();
            let fr: &dyn Dynamics<T> = f;
            let parts: Vec<Result<Vec<T>>> =
                batch.par_chunks(sub).map(|c| chunk_grad(fr, c, cfg.wrap_angle, p)).collect();
            let mut grad = vec![T::zero(); p];
            for (part, c) in parts.into_iter().zip(batch.chunks(sub)) {
                // each part is a mean over its own chunk
                let w = T::lit(c.len() as f64 / batch.len() as f64);
                for (g, v) in grad.iter_mut().zip(part?) {
                    *g += w * v;
                }
            }
            rmsprop_step(&mut params, &grad, &mut st, None)?;
            f.read_params(&params);
        }
        let train_loss = loss_dyn(f, train, cfg.wrap_angle)?.to_f64_lossy();
        if !train_loss.is_finite() {
            return Err(PiError::Numeric(format!("pre-training loss became {train_loss} at epoch {epoch}")));
        }
        let test_loss = if test.is_empty() { None } else { Some(loss_dyn(f, test, cfg.wrap_angle)?.to_f64_lossy()) };
        history.push(PretrainRecord { epoch, lr: st.lr, train: train_loss, test: test_loss });
        log::debug!("pretrain epoch {epoch}: train {train_loss:e} test {test_loss:?}");
        lr_plateau_schedule(&mut st, train_loss);
    }
    let train_loss = Some(loss_dyn(f, train, cfg.wrap_angle)?.to_f64_lossy());
    let test_loss = if test.is_empty() { None } else { Some(loss_dyn(f, test, cfg.wrap_angle)?.to_f64_lossy()) };
    Ok(PretrainReport { train_loss, test_loss, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::models::LinearDynamics;
    use crate::params::Parameterized;
    use crate::rng::standard_normal;

    fn linear_data(count: usize, seed: u64) -> Vec<MpcSample<f64>> {
        let f = Mat::from_rows(&[&[0.9, 0.2], &[-0.1, 0.95]]).unwrap();
        let g = Mat::from_rows(&[&[0.0], &[0.3]]).unwrap();
        let mut r = SeededRng::new(seed).generator();
        (0..count)
            .map(|_| {
                let x: Vec<f64> = (0..2).map(|_| standard_normal(&mut r)).collect();
                let u = vec![standard_normal(&mut r)];
                let mut y = f.vec(&x);
                g.mul_vec_acc(&u, &mut y);
                MpcSample { x, u, x_next: y }
            })
            .collect()
    }

    #[test]
    fn zero_epochs_is_noop() {
        let mut m = LinearDynamics::new(Mat::identity(2), Mat::zeros(2, 1)).unwrap();
        let before = m.clone();
        let cfg = PretrainConfig { epochs: 0, ..Default::default() };
        pretrain_dynamics(&mut m, &linear_data(10, 0), &[], &cfg, &SeededRng::new(0)).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn fits_linear_system() {
        let mut m = LinearDynamics::new(Mat::identity(2), Mat::zeros(2, 1)).unwrap();
        let cfg = PretrainConfig {
            epochs: 60,
            batch: 16,
            wrap_angle: false,
            optimizer: OptimizerConfig { lr: 1e-2, ..Default::default() },
        };
        let rep =
            pretrain_dynamics(&mut m, &linear_data(400, 1), &linear_data(50, 2), &cfg, &SeededRng::new(3)).unwrap();
        let first = rep.history[0].train;
        assert!(rep.train_loss.unwrap() < 1e-2 * first, "{:?}", rep.train_loss);
        assert!(rep.test_loss.unwrap() < 1e-4);
        assert_eq!(m.param_count(), 6);
    }
}
