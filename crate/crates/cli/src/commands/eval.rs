use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use pinet_core::envs::{
    mpc_simulate, one_step_relative_error, pendulum_initial_states, IlqrMpc, LinearTeacher, MpcController,
    PendulumTask, PiMpc, SimulationResult,
};
use pinet_core::experts::{lqr_objective, lqr_solve};
use pinet_core::training::{evaluate_pinet, Demonstration, TrainData};
use pinet_core::{Models, PiError, SeededRng};

use super::{load_checkpoint, load_dataset, print_json, stream, strided, Dataset, Invocation, Source};
use crate::config::{Environment, ExperimentConfig};
use crate::error::CliResult;
use crate::io::{num, write_csv, ExpertMetrics, SplitMetrics};

pub const METRICS_FILE: &str = "metrics.json";
pub const RUNS_FILE: &str = "eval_runs.csv";

/// Seconds spent in each phase; printed, never written to disk.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct WallTimes {
    pub mse: f64,
    pub closed_loop: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub controller: String,
    pub environment: Environment,
    /// Imitation MSE on each split; absent for the expert and for empty
    /// splits.
    pub mse_train: Option<f64>,
    pub mse_test: Option<f64>,
    /// Closed-loop runs from random initial states (pendulum).
    pub runs: usize,
    pub success_rate: Option<f64>,
    /// Mean trajectory cost over the runs that did not diverge.
    pub mean_cost: Option<f64>,
    pub diverged: usize,
    pub trainable_params: Option<usize>,
    /// Mean one-step relative error of the learned dynamics (linear).
    pub dynamics_rel_error: Option<f64>,
    /// The expert replayed from the dataset's initial states (expert only).
    pub dataset_expert: Option<ExpertMetrics>,
    pub matches_manifest: Option<bool>,
    #[serde(skip)]
    pub wall_times: WallTimes,
}

/// One closed-loop run per initial state. Diverged runs are `None`.
pub(crate) fn closed_loop<'a, F>(
    starts: &[Vec<f64>],
    steps: usize,
    warm_start: bool,
    plant: &(dyn pinet_core::envs::Plant<f64> + 'a),
    make: F,
) -> CliResult<Vec<Option<SimulationResult<f64>>>>
where
    F: Fn(usize) -> Box<dyn MpcController<f64> + 'a> + Sync,
{
    let results: Vec<pinet_core::Result<SimulationResult<f64>>> = starts
        .par_iter()
        .enumerate()
        .map(|(j, x0)| {
            let mut c = make(j);
            mpc_simulate(c.as_mut(), plant, x0, steps, warm_start)
        })
        .collect();
    results
        .into_iter()
        .enumerate()
        .map(|(j, r)| match r {
            Ok(r) => Ok(Some(r)),
            Err(PiError::Numeric(msg)) => {
                log::warn!("run {j} diverged: {msg}");
                Ok(None)
            }
            Err(e) => Err(e.into()),
        })
        .collect()
}

pub(crate) fn pi_controller<'a>(
    cfg: &ExperimentConfig,
    models: &'a Models,
    rng: SeededRng,
) -> Box<dyn MpcController<f64> + 'a> {
    Box::new(PiMpc { models, hp: cfg.pi, warm_iterations: cfg.warm_iterations, rng })
}

pub(crate) fn ilqr_controller<'a>(
    cfg: &ExperimentConfig,
    task: &'a PendulumTask<f64>,
) -> Box<dyn MpcController<f64> + 'a> {
    Box::new(IlqrMpc { problem: task, horizon: cfg.data.horizon, settings: cfg.data.ilqr, cold_control: 0.0 })
}

fn replay_pendulum(
    cfg: &ExperimentConfig,
    task: &PendulumTask<f64>,
    demos: &[Demonstration<f64>],
    steps: usize,
) -> CliResult<SplitMetrics> {
    let starts: Vec<Vec<f64>> = demos.iter().map(|d| d.states[0].clone()).collect();
    let runs = closed_loop(&starts, steps, cfg.data.warm_start, task, |_| ilqr_controller(cfg, task))?;
    // a diverged replay never matches a kept demonstration
    let costs: Vec<f64> = runs.iter().map(|r| r.as_ref().map_or(f64::INFINITY, |r| r.cost)).collect();
    let ok: Vec<bool> = runs.iter().map(|r| r.as_ref().is_some_and(|r| r.success)).collect();
    Ok(SplitMetrics::from_runs(&costs, Some(&ok)))
}

fn replay_linear(teacher: &LinearTeacher<f64>, horizon: usize, x0s: &[Vec<f64>]) -> CliResult<SplitMetrics> {
    let p = teacher.lqr_problem(horizon)?;
    let costs = x0s.iter().map(|x| Ok(lqr_objective(&p, x, &lqr_solve(&p, x)?))).collect::<CliResult<Vec<f64>>>()?;
    Ok(SplitMetrics::from_runs(&costs, None))
}

/// Dataset MSEs and closed-loop performance of a checkpoint or the expert.
pub fn eval(inv: &Invocation, data_dir: &Path, source: &Source) -> CliResult<MetricsReport> {
    let cfg = &inv.cfg;
    crate::config::check_success_window(cfg)?;
    let (manifest, dataset) = load_dataset(data_dir, cfg)?;
    let loaded = match source {
        Source::Checkpoint(p) => Some(load_checkpoint(p, cfg)?),
        Source::Expert => None,
    };
    let mut outputs = vec![METRICS_FILE];
    if cfg.environment == Environment::Pendulum {
        outputs.push(RUNS_FILE);
    }
    let ws = inv.workspace("eval", &outputs)?;
    let root = inv.root();
    let t0 = Instant::now();
    let mut report = MetricsReport {
        controller: if loaded.is_some() { "pinet" } else { "expert" }.into(),
        environment: cfg.environment,
        mse_train: None,
        mse_test: None,
        runs: 0,
        success_rate: None,
        mean_cost: None,
        diverged: 0,
        trainable_params: loaded.as_ref().map(|(_, m)| m.trainable_count(&cfg.train.freeze)),
        dynamics_rel_error: None,
        dataset_expert: None,
        matches_manifest: None,
        wall_times: WallTimes::default(),
    };

    let pend = |d: &[Demonstration<f64>]| strided(d, cfg.data.stride);
    match (&dataset, &loaded) {
        (Dataset::Linear { teacher, train, test }, Some((_, models))) => {
            let data = TrainData::OpenLoop { train, test };
            let (tr, te) = evaluate_pinet(models, &cfg.pi, &data, &cfg.train, &root.substream(stream::TRAINING))?;
            (report.mse_train, report.mse_test) = (tr.ctrl, te.ctrl);
            let pairs = root.substream(stream::DYNAMICS_PAIRS);
            report.dynamics_rel_error =
                Some(one_step_relative_error(models.dynamics.as_ref(), teacher, &pairs, cfg.eval.dynamics_pairs));
        }
        (Dataset::Linear { teacher, train, test }, None) => {
            let x0s =
                |s: &[pinet_core::training::OpenLoopSample<f64>]| s.iter().map(|s| s.x0.clone()).collect::<Vec<_>>();
            let replay = ExpertMetrics {
                train: replay_linear(teacher, manifest.horizon, &x0s(train))?,
                test: replay_linear(teacher, manifest.horizon, &x0s(test))?,
            };
            report.matches_manifest = Some(replay == manifest.expert);
            report.dataset_expert = Some(replay);
        }
        (Dataset::Pendulum { train, test }, Some((_, models))) => {
            let (train, test) = (pend(train), pend(test));
            let data = TrainData::Mpc { train: &train, test: &test };
            let (tr, te) = evaluate_pinet(models, &cfg.pi, &data, &cfg.train, &root.substream(stream::TRAINING))?;
            (report.mse_train, report.mse_test) = (tr.ctrl, te.ctrl);
        }
        (Dataset::Pendulum { train, test }, None) => {
            let task = PendulumTask::default();
            let replay = ExpertMetrics {
                train: replay_pendulum(cfg, &task, train, manifest.steps)?,
                test: replay_pendulum(cfg, &task, test, manifest.steps)?,
            };
            report.matches_manifest = Some(replay == manifest.expert);
            report.dataset_expert = Some(replay);
        }
    }
    report.wall_times.mse = t0.elapsed().as_secs_f64();

    if cfg.environment == Environment::Pendulum {
        let t1 = Instant::now();
        let task = PendulumTask::default();
        let starts: Vec<Vec<f64>> = pendulum_initial_states::<f64>(&root.substream(stream::EVAL_STARTS), cfg.eval.runs)
            .iter()
            .map(|s| s.to_vec())
            .collect();
        let steps = cfg.steps_for(cfg.eval.duration);
        let noise = root.substream(stream::EVAL_NOISE);
        let runs = match &loaded {
            Some((_, models)) => closed_loop(&starts, steps, cfg.eval.warm_start, &task, |j| {
                pi_controller(cfg, models, noise.substream(j as u64))
            })?,
            None => closed_loop(&starts, steps, cfg.eval.warm_start, &task, |_| ilqr_controller(cfg, &task))?,
        };
        let done: Vec<&SimulationResult<f64>> = runs.iter().flatten().collect();
        report.runs = runs.len();
        report.diverged = runs.len() - done.len();
        report.success_rate = Some(done.iter().filter(|r| r.success).count() as f64 / runs.len() as f64);
        report.mean_cost = (!done.is_empty()).then(|| done.iter().map(|r| r.cost).sum::<f64>() / done.len() as f64);
        let header = ["run", "x0", "x1", "success", "cost"].map(String::from);
        let rows = runs.iter().zip(&starts).enumerate().map(|(j, (r, x0))| {
            vec![
                j.to_string(),
                num(x0[0]),
                num(x0[1]),
                r.as_ref().map_or("diverged".into(), |r| r.success.to_string()),
                r.as_ref().map(|r| num(r.cost)).unwrap_or_default(),
            ]
        });
        write_csv(&ws.path(RUNS_FILE), &header, rows)?;
        report.wall_times.closed_loop = t1.elapsed().as_secs_f64();
    }
    report.wall_times.total = t0.elapsed().as_secs_f64();
    ws.write_json(METRICS_FILE, &report)?;
    print_json(&report)?;
    println!("wall time: {}", serde_json::to_string(&report.wall_times)?);
    Ok(report)
}
