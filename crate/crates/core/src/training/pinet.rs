use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{pi_net_backward, pi_net_forward, tape_bytes};
use crate::error::{param_err, PiError, Result};
use crate::models::{FreezeSet, PiModels, DYNAMICS_ID, RUNNING_COST_ID};
use crate::params::ParamVector;
use crate::rng::SeededRng;
use crate::scalar::Real;
use crate::types::{ControlSequence, PiHyperParams};

use super::dataset::{MpcSample, OpenLoopSample};
use super::losses::{
    loss_cost, loss_cost_grad, loss_ctrl, loss_ctrl_first, loss_ctrl_first_grad, loss_ctrl_grad, loss_dyn,
    loss_dyn_grad,
};
use super::optim::{lr_plateau_schedule, rmsprop_step, OptimizerConfig, OptimizerState};

/// Imitation target: whole open-loop plans, or the first control of an
/// MPC expert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    OpenLoop,
    Mpc,
}

pub enum TrainData<'a, T> {
    OpenLoop { train: &'a [OpenLoopSample<T>], test: &'a [OpenLoopSample<T>] },
    Mpc { train: &'a [MpcSample<T>], test: &'a [MpcSample<T>] },
}

impl<T> TrainData<'_, T> {
    pub fn regime(&self) -> Regime {
        match self {
            TrainData::OpenLoop { .. } => Regime::OpenLoop,
            TrainData::Mpc { .. } => Regime::Mpc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub ctrl: f64,
    pub dynamics: f64,
    pub cost: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { ctrl: 1.0, dynamics: 0.0, cost: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub freeze: FreezeSet,
    pub weights: LossWeights,
    pub optimizer: OptimizerConfig,
    /// Upper bound on the bytes held by one batch of recorded passes.
    pub memory_budget_bytes: u64,
    /// Goal states of the cost ramp loss.
    pub goals: Vec<Vec<f64>>,
    /// Compare the first state component on the circle in the dynamics loss.
    pub wrap_angle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch: 8,
            freeze: FreezeSet::new(),
            weights: LossWeights::default(),
            optimizer: OptimizerConfig::default(),
            memory_budget_bytes: 2 << 30,
            goals: Vec::new(),
            wrap_angle: false,
        }
    }
}

/// Losses of one full evaluation pass; `None` where a term does not apply
/// or the split is empty.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalLosses {
    pub ctrl: Option<f64>,
    pub dynamics: Option<f64>,
    pub cost: Option<f64>,
    pub total: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Rate used during this epoch.
    pub lr: f64,
    pub train: EvalLosses,
    pub test: EvalLosses,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub history: Vec<EpochRecord>,
    pub optimizer: OptimizerState,
    /// Epoch and parameters with the lowest test loss (training loss when
    /// there is no test split).
    pub best: Option<(usize, ParamVector<T>)>,
}

trait Sample<T: Real>: Sync {
    fn x0(&self) -> &[T];
    fn ctrl_loss(&self, out: &ControlSequence<T>) -> Result<T>;
    fn ctrl_cot(&self, out: &ControlSequence<T>) -> Result<ControlSequence<T>>;
    fn transition(&self) -> Option<&MpcSample<T>>;
}

impl<T: Real> Sample<T> for OpenLoopSample<T> {
    fn x0(&self) -> &[T] {
        &self.x0
    }
    fn ctrl_loss(&self, out: &ControlSequence<T>) -> Result<T> {
        loss_ctrl(out, &self.controls)
    }
    fn ctrl_cot(&self, out: &ControlSequence<T>) -> Result<ControlSequence<T>> {
        loss_ctrl_grad(out, &self.controls)
    }
    fn transition(&self) -> Option<&MpcSample<T>> {
        None
    }
}

impl<T: Real> Sample<T> for MpcSample<T> {
    fn x0(&self) -> &[T] {
        &self.x
    }
    fn ctrl_loss(&self, out: &ControlSequence<T>) -> Result<T> {
        loss_ctrl_first(out, &self.u)
    }
    fn ctrl_cot(&self, out: &ControlSequence<T>) -> Result<ControlSequence<T>> {
        loss_ctrl_first_grad(out, &self.u)
    }
    fn transition(&self) -> Option<&MpcSample<T>> {
        Some(self)
    }
}

struct Setup<'a, T: Real> {
    hp: &'a PiHyperParams<T>,
    cfg: &'a TrainConfig,
    goals: Vec<Vec<T>>,
}

impl<T: Real> Setup<'_, T> {
    fn init(&self, models: &PiModels<T>) -> ControlSequence<T> {
        ControlSequence::zeros(self.hp.horizon, models.control_dim())
    }

    fn uses_dyn<S: Sample<T>>(&self, first: Option<&S>) -> bool {
        self.cfg.weights.dynamics != 0.0 && first.is_some_and(|s| s.transition().is_some())
    }

    /// Evaluation noise is fixed per (split, sample) so reported losses do
    /// not depend on batch order or epoch.
    fn evaluate<S: Sample<T>>(&self, models: &PiModels<T>, samples: &[S], rng: &SeededRng) -> Result<EvalLosses> {
        if samples.is_empty() {
            return Ok(EvalLosses::default());
        }
        let init = self.init(models);
        let ctrl: Vec<Result<T>> = samples
            .par_iter()
            .enumerate()
            .map(|(j, s)| {
                let (out, _) = pi_net_forward(s.x0(), &init, models, self.hp, &rng.substream(j as u64), false)?;
                s.ctrl_loss(&out)
            })
            .collect();
        let mut sum = T::zero();
        for c in ctrl {
            sum += c?;
        }
        let ctrl = (sum / T::lit(samples.len() as f64)).to_f64_lossy();
        let w = &self.cfg.weights;
        let mut total = w.ctrl * ctrl;
        let dynamics = if self.uses_dyn(samples.first()) {
            let tr: Vec<MpcSample<T>> = samples.iter().filter_map(|s| s.transition().cloned()).collect();
            let v = loss_dyn(models.dynamics.as_ref(), &tr, self.cfg.wrap_angle)?.to_f64_lossy();
            total += w.dynamics * v;
            Some(v)
        } else {
            None
        };
        let cost = if w.cost != 0.0 {
            let xs: Vec<Vec<T>> = samples.iter().map(|s| s.x0().to_vec()).collect();
            let v = loss_cost(models.running_cost.as_ref(), &self.goals, &xs)?.to_f64_lossy();
            total += w.cost * v;
            Some(v)
        } else {
            None
        };
        Ok(EvalLosses { ctrl: Some(ctrl), dynamics, cost, total: Some(total) })
    }

    /// Gradient of the weighted batch loss.
    fn batch_gradient<S: Sample<T>>(
        &self,
        models: &PiModels<T>,
        batch: &[(usize, &S)],
        rng: &SeededRng,
    ) -> Result<ParamVector<T>> {
        let init = self.init(models);
        let scale = T::lit(self.cfg.weights.ctrl / batch.len() as f64);
        let frozen = &self.cfg.freeze;
        let parts: Vec<Result<ParamVector<T>>> = batch
            .par_iter()
            .map(|&(j, s)| {
                let (out, tape) = pi_net_forward(s.x0(), &init, models, self.hp, &rng.substream(j as u64), true)?;
                let mut cot = s.ctrl_cot(&out)?;
                for v in cot.as_mut_slice() {
                    *v *= scale;
                }
                pi_net_backward(&tape.expect("recorded"), models, &cot, frozen)
            })
            .collect();
        let mut grad = models.pack().zeros_like();
        for part in parts {
            for (g, v) in grad.values_mut().iter_mut().zip(part?.values()) {
                *g += *v;
            }
        }
        let samples: Vec<&S> = batch.iter().map(|&(_, s)| s).collect();
        if self.uses_dyn(samples.first().copied()) && !frozen.contains(DYNAMICS_ID) {
            let tr: Vec<MpcSample<T>> = samples.iter().filter_map(|s| s.transition().cloned()).collect();
            let seg = grad.segment_mut(DYNAMICS_ID).expect("dynamics segment");
            let mut g = vec![T::zero(); seg.len()];
            loss_dyn_grad(models.dynamics.as_ref(), &tr, self.cfg.wrap_angle, &mut g)?;
            let w = T::lit(self.cfg.weights.dynamics);
            for (a, b) in seg.iter_mut().zip(g) {
                *a += w * b;
            }
        }
        if self.cfg.weights.cost != 0.0 && !frozen.contains(RUNNING_COST_ID) {
            let xs: Vec<Vec<T>> = samples.iter().map(|s| s.x0().to_vec()).collect();
            let seg = grad.segment_mut(RUNNING_COST_ID).expect("cost segment");
            loss_cost_grad(models.running_cost.as_ref(), &self.goals, &xs, T::lit(self.cfg.weights.cost), seg)?;
        }
        if grad.values().iter().any(|v| !v.is_finite()) {
            return Err(PiError::Numeric("non-finite gradient".into()));
        }
        Ok(grad)
    }
}

/// Refuses configurations whose recorded forward passes for one batch
/// would exceed `cfg.memory_budget_bytes`.
pub fn check_memory_budget<T: Real>(
    hp: &PiHyperParams<T>,
    state_dim: usize,
    control_dim: usize,
    cfg: &TrainConfig,
) -> Result<()> {
    let need = tape_bytes(hp, state_dim, control_dim).saturating_mul(cfg.batch as u64);
    if need > cfg.memory_budget_bytes {
        let factor = need as f64 / cfg.memory_budget_bytes.max(1) as f64;
        return Err(PiError::MemoryBudget(format!(
            "a batch of {} recorded passes (U={} N={} K={}) needs {need} bytes but the budget is {}; \
             reduce U*N*K*B by a factor of at least {factor:.2}",
            cfg.batch, hp.iterations, hp.horizon, hp.trajectories, cfg.memory_budget_bytes
        )));
    }
    Ok(())
}

/// End-to-end imitation training. Epoch `e` shuffles with
/// `rng.substream(e).substream(0)`, and the pass for training sample `j`
/// draws its noise from `rng.substream(e).substream(1).substream(j)`. Pass
/// `resume` to continue from a saved optimiser state; `start_epoch` offsets
/// the epoch numbering (and hence the seeds).
pub fn train_pinet<T: Real>(
    models: &mut PiModels<T>,
    hp: &PiHyperParams<T>,
    data: &TrainData<'_, T>,
    cfg: &TrainConfig,
    rng: &SeededRng,
    resume: Option<OptimizerState>,
    start_epoch: usize,
) -> Result<TrainOutcome<T>> {
    hp.validate()?;
    if cfg.batch == 0 {
        return param_err("batch size must be at least 1");
    }
    check_memory_budget(hp, models.state_dim(), models.control_dim(), cfg)?;
    if cfg.weights.cost != 0.0 && cfg.goals.is_empty() {
        return param_err("the cost loss needs at least one goal state");
    }
    for id in &cfg.freeze {
        if !models.segment_ids().contains(&id.as_str()) {
            return param_err(format!("unknown parameter segment '{id}' in freeze list"));
        }
    }
    let setup = Setup { hp, cfg, goals: cfg.goals.iter().map(|g| g.iter().map(|&v| T::lit(v)).collect()).collect() };
    match data {
        TrainData::OpenLoop { train, test } => run(models, &setup, train, test, rng, resume, start_epoch),
        TrainData::Mpc { train, test } => run(models, &setup, train, test, rng, resume, start_epoch),
    }
}

/// Evaluation-pass losses of `models` on both splits, using the same noise
/// as the per-epoch history of [`train_pinet`].
pub fn evaluate_pinet<T: Real>(
    models: &PiModels<T>,
    hp: &PiHyperParams<T>,
    data: &TrainData<'_, T>,
    cfg: &TrainConfig,
    rng: &SeededRng,
) -> Result<(EvalLosses, EvalLosses)> {
    hp.validate()?;
    let setup = Setup { hp, cfg, goals: cfg.goals.iter().map(|g| g.iter().map(|&v| T::lit(v)).collect()).collect() };
    let eval = rng.substream(u64::MAX);
    match data {
        TrainData::OpenLoop { train, test } => {
            Ok((setup.evaluate(models, train, &eval.substream(0))?, setup.evaluate(models, test, &eval.substream(1))?))
        }
        TrainData::Mpc { train, test } => {
            Ok((setup.evaluate(models, train, &eval.substream(0))?, setup.evaluate(models, test, &eval.substream(1))?))
        }
    }
}

/// Gradient of the weighted loss on the training samples `indices`, as one
/// training step of [`train_pinet`] computes it; sample `j`'s noise comes
/// from `rng.substream(j)`.
pub fn batch_gradient<T: Real>(
    models: &PiModels<T>,
    hp: &PiHyperParams<T>,
    data: &TrainData<'_, T>,
    cfg: &TrainConfig,
    rng: &SeededRng,
    indices: &[usize],
) -> Result<ParamVector<T>> {
    hp.validate()?;
    let setup = Setup { hp, cfg, goals: cfg.goals.iter().map(|g| g.iter().map(|&v| T::lit(v)).collect()).collect() };
    fn pick<'s, S>(train: &'s [S], indices: &[usize]) -> Result<Vec<(usize, &'s S)>> {
        indices
            .iter()
            .map(|&j| {
                train.get(j).map(|s| (j, s)).ok_or_else(|| PiError::Parameter(format!("sample {j} out of range")))
            })
            .collect()
    }
    if indices.is_empty() {
        return param_err("empty batch");
    }
    match data {
        TrainData::OpenLoop { train, .. } => setup.batch_gradient(models, &pick(train, indices)?, rng),
        TrainData::Mpc { train, .. } => setup.batch_gradient(models, &pick(train, indices)?, rng),
    }
}

fn run<T: Real, S: Sample<T>>(
    models: &mut PiModels<T>,
    setup: &Setup<'_, T>,
    train: &[S],
    test: &[S],
    rng: &SeededRng,
    resume: Option<OptimizerState>,
    start_epoch: usize,
) -> Result<TrainOutcome<T>> {
    if train.is_empty() {
        return param_err("training set is empty");
    }
    let cfg = setup.cfg;
    let mut params = models.pack();
    let trainable: Vec<bool> = {
        let mut mask = vec![true; params.len()];
        for seg in params.layout() {
            if cfg.freeze.contains(&seg.id) {
                mask[seg.offset..seg.offset + seg.len].fill(false);
            }
        }
        mask
    };
    let mut st = match resume {
        Some(st) if st.accum.len() == params.len() => st,
        Some(st) => {
            return Err(PiError::Consistency(format!(
                "optimizer state has {} accumulators, models have {} parameters",
                st.accum.len(),
                params.len()
            )))
        }
        None => OptimizerState::new(cfg.optimizer, params.len())?,
    };
    let eval = rng.substream(u64::MAX);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, ParamVector<T>)> = None;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in start_epoch..start_epoch + cfg.epochs {
        let erng = rng.substream(epoch as u64);
        let lr = st.lr;
        order.sort_unstable();
        order.shuffle(&mut erng.substream(0).generator());
        let noise = erng.substream(1);
        for idx in order.chunks(cfg.batch) {
            let batch: Vec<(usize, &S)> = idx.iter().map(|&j| (j, &train[j])).collect();
            let grad = setup.batch_gradient(models, &batch, &noise)?;
            rmsprop_step(params.values_mut(), grad.values(), &mut st, Some(&trainable))?;
            models.unpack(&params)?;
        }
        let tr = setup.evaluate(models, train, &eval.substream(0))?;
        let te = setup.evaluate(models, test, &eval.substream(1))?;
        let train_total = tr.total.unwrap_or(f64::NAN);
        if !train_total.is_finite() {
            return Err(PiError::Numeric(format!("training loss became {train_total} at epoch {epoch}")));
        }
        let score = te.total.unwrap_or(train_total);
        if best.as_ref().is_none_or(|b| score < b.1) {
            best = Some((epoch, score, params.clone()));
        }
        log::info!("epoch {epoch}: lr {lr:e} train {train_total:e} test {:?}", te.total);
        history.push(EpochRecord { epoch, lr, train: tr, test: te });
        lr_plateau_schedule(&mut st, train_total);
    }
    Ok(TrainOutcome { history, optimizer: st, best: best.map(|(e, _, p)| (e, p)) })
}
