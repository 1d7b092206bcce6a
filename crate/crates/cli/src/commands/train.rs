use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use pinet_core::envs::{initial_linear_models, LINEAR_CONTROL_DIM, LINEAR_STATE_DIM, PENDULUM_DT};
use pinet_core::models::{
    ControlCostWeight, Dynamics, FreezeSet, MlpCost, MlpDynamics, PendulumTeacherCost, StateCost, TerminalCost,
};
use pinet_core::training::{
    check_memory_budget, pretrain_dynamics, train_pinet, EvalLosses, PretrainReport, TrainData,
};
use pinet_core::{Models, SeededRng};

use super::{load_checkpoint, load_dataset, print_json, stream, strided, Dataset, Invocation};
use crate::config::{CostKind, Environment, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::io::{write_history, write_pretrain_history, Checkpoint};

pub const BEST_CHECKPOINT: &str = "checkpoint.json";
pub const LAST_CHECKPOINT: &str = "last.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const PRETRAIN_HISTORY_FILE: &str = "pretrain_history.csv";
pub const TRAIN_METRICS_FILE: &str = "train_metrics.json";

/// Published parameter counts of the pendulum networks, printed for
/// comparison.
#[derive(Debug, Clone, Serialize)]
pub struct Reference {
    pub trained_pinet_params: usize,
    pub frozen_pinet_params: usize,
    pub trained_pinet_test_mse: f64,
}

const PENDULUM_REFERENCE: Reference =
    Reference { trained_pinet_params: 242, frozen_pinet_params: 49, trained_pinet_test_mse: 1.65e-3 };

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub first_epoch: usize,
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    /// Losses at the best epoch; `ctrl` is the MSE of the imitated controls.
    pub best_train: Option<EvalLosses>,
    pub best_test: Option<EvalLosses>,
    pub trainable_params: usize,
    pub total_params: usize,
    pub pretrain: Option<PretrainSummary>,
    pub reference: Option<Reference>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PretrainSummary {
    pub train_loss: Option<f64>,
    pub test_loss: Option<f64>,
}

fn pendulum_models(cfg: &ExperimentConfig, root: &SeededRng, dynamics: Box<dyn Dynamics<f64>>) -> CliResult<Models> {
    let init = root.substream(stream::MODEL_INIT);
    let m = &cfg.models;
    let cost = |tag: u64| -> Box<dyn StateCost<f64>> {
        match m.cost {
            CostKind::Mlp => Box::new(MlpCost::initialized(m.cost_hidden, m.cost_outputs, &init.substream(tag))),
            CostKind::Teacher => Box::new(PendulumTeacherCost),
        }
    };
    let terminal = if m.separate_terminal { TerminalCost::Separate(cost(2)) } else { TerminalCost::SameAsRunning };
    Ok(Models::new(dynamics, cost(1), terminal, ControlCostWeight::identity(1))?)
}

/// Pre-training (pendulum, fresh runs only) followed by end-to-end
/// imitation. `resume` continues from a `last.json` checkpoint.
pub fn train(inv: &Invocation, data_dir: &Path, resume: Option<&PathBuf>) -> CliResult<TrainReport> {
    let cfg = &inv.cfg;
    let (_, dataset) = load_dataset(data_dir, cfg)?;
    let pretraining = resume.is_none() && cfg.environment == Environment::Pendulum && cfg.pretrain.enabled;
    let mut outputs = vec![BEST_CHECKPOINT, LAST_CHECKPOINT, HISTORY_FILE, TRAIN_METRICS_FILE];
    if pretraining {
        outputs.push(PRETRAIN_HISTORY_FILE);
    }
    let resumed = match resume {
        Some(p) => {
            let (ck, models) = load_checkpoint(p, cfg)?;
            let opt = ck.optimizer.clone().ok_or_else(|| {
                CliError::validation(format!("{} holds no optimizer state; resume from {LAST_CHECKPOINT}", p.display()))
            })?;
            Some((ck, models, opt))
        }
        None => None,
    };
    let (n, m) = match cfg.environment {
        Environment::Linear => (LINEAR_STATE_DIM, LINEAR_CONTROL_DIM),
        Environment::Pendulum => (2, 1),
    };
    check_memory_budget(&cfg.pi, n, m, &cfg.train)?;
    let ws = inv.workspace("train", &outputs)?;
    let root = inv.root();
    let start = Instant::now();

    let pend = |d: &[pinet_core::training::Demonstration<f64>]| strided(d, cfg.data.stride);
    let (train_mpc, test_mpc) = match &dataset {
        Dataset::Pendulum { train, test } => (pend(train), pend(test)),
        Dataset::Linear { .. } => (Vec::new(), Vec::new()),
    };

    let mut pretrain: Option<PretrainReport> = None;
    let (mut models, opt_state, first_epoch, mut history) = match resumed {
        Some((ck, models, opt)) => (models, Some(opt), ck.next_epoch, ck.history),
        None => {
            let models = match &dataset {
                Dataset::Linear { .. } => initial_linear_models::<f64>(&root.substream(stream::MODEL_INIT))?,
                Dataset::Pendulum { train, test } => {
                    let init = root.substream(stream::MODEL_INIT).substream(0);
                    let mut f = MlpDynamics::initialized(cfg.models.dynamics_hidden, PENDULUM_DT, &init);
                    if pretraining {
                        let (all_train, all_test) = (strided(train, 1), strided(test, 1));
                        let report = pretrain_dynamics(
                            &mut f,
                            &all_train,
                            &all_test,
                            &cfg.pretrain.settings,
                            &root.substream(stream::PRETRAIN),
                        )?;
                        write_pretrain_history(&ws.path(PRETRAIN_HISTORY_FILE), &report.history)?;
                        log::info!("pre-training done: train {:?} test {:?}", report.train_loss, report.test_loss);
                        pretrain = Some(report);
                    }
                    pendulum_models(cfg, &root, Box::new(f))?
                }
            };
            (models, None, 0, Vec::new())
        }
    };

    let data = match &dataset {
        Dataset::Linear { train, test, .. } => TrainData::OpenLoop { train, test },
        Dataset::Pendulum { .. } => TrainData::Mpc { train: &train_mpc, test: &test_mpc },
    };
    let outcome = train_pinet(
        &mut models,
        &cfg.pi,
        &data,
        &cfg.train,
        &root.substream(stream::TRAINING),
        opt_state,
        first_epoch,
    )?;
    history.extend(outcome.history.iter().cloned());
    let next_epoch = first_epoch + cfg.train.epochs;

    let last = Checkpoint::new(
        &cfg.experiment_id,
        cfg.environment,
        next_epoch.checked_sub(1),
        &models,
        models.pack(),
        cfg.pi,
        cfg.warm_iterations,
        next_epoch,
        Some(outcome.optimizer.clone()),
        history.clone(),
    );
    ws.write_json(LAST_CHECKPOINT, &last)?;
    // on a resumed run the best epoch is only searched among the new epochs
    let (best_epoch, best_params) = match outcome.best {
        Some((e, p)) => (Some(e), p),
        None => (last.epoch, models.pack()),
    };
    let best = Checkpoint { epoch: best_epoch, params: best_params, optimizer: None, ..last };
    ws.write_json(BEST_CHECKPOINT, &best)?;
    write_history(&ws.path(HISTORY_FILE), &history)?;

    let best_record = history.iter().find(|r| Some(r.epoch) == best_epoch);
    let frozen: &FreezeSet = &cfg.train.freeze;
    let report = TrainReport {
        first_epoch,
        epochs_run: cfg.train.epochs,
        best_epoch,
        best_train: best_record.map(|r| r.train),
        best_test: best_record.map(|r| r.test),
        trainable_params: models.trainable_count(frozen),
        total_params: models.pack().len(),
        pretrain: pretrain.map(|p| PretrainSummary { train_loss: p.train_loss, test_loss: p.test_loss }),
        reference: (cfg.environment == Environment::Pendulum).then_some(PENDULUM_REFERENCE),
    };
    ws.write_json(TRAIN_METRICS_FILE, &report)?;
    print_json(&report)?;
    println!("wall time: {:.2} s", start.elapsed().as_secs_f64());
    Ok(report)
}
