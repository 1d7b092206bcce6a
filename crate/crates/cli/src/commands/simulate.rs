use std::path::Path;

use serde::Serialize;

use pinet_core::envs::{
    mpc_simulate, sample_linear_teacher, write_trajectory_csv, LqrMpc, MpcController, PendulumTask, Plant,
};

use super::eval::{ilqr_controller, pi_controller};
use super::{load_checkpoint, load_dataset, print_json, stream, Dataset, Invocation, Source};
use crate::config::Environment;
use crate::error::CliResult;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SIMULATION_FILE: &str = "simulation.json";

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub controller: String,
    pub steps: usize,
    pub success: bool,
    pub cost: f64,
}

/// One closed-loop run from `simulate.x0`. Linear runs use the teacher of
/// the dataset in `data_dir` when given, otherwise the teacher drawn from
/// the experiment seed.
pub fn simulate(inv: &Invocation, source: &Source, data_dir: Option<&Path>) -> CliResult<SimulationSummary> {
    let cfg = &inv.cfg;
    let loaded = match source {
        Source::Checkpoint(p) => Some(load_checkpoint(p, cfg)?),
        Source::Expert => None,
    };
    let root = inv.root();
    let pendulum = PendulumTask::default();
    let linear = match cfg.environment {
        Environment::Pendulum => None,
        Environment::Linear => Some(match data_dir {
            Some(d) => match load_dataset(d, cfg)?.1 {
                Dataset::Linear { teacher, .. } => teacher,
                Dataset::Pendulum { .. } => unreachable!("environment checked by load_dataset"),
            },
            None => sample_linear_teacher::<f64>(&root.substream(stream::TEACHER))?,
        }),
    };
    let plant: &dyn Plant<f64> = match &linear {
        Some(t) => t,
        None => &pendulum,
    };
    let ws = inv.workspace("simulate", &[TRAJECTORY_FILE, SIMULATION_FILE])?;
    let mut controller: Box<dyn MpcController<f64> + '_> = match (&loaded, &linear) {
        (Some((_, models)), _) => pi_controller(cfg, models, root.substream(stream::SIMULATE)),
        (None, Some(t)) => Box::new(LqrMpc { problem: t.lqr_problem(cfg.data.horizon)? }),
        (None, None) => ilqr_controller(cfg, &pendulum),
    };
    let steps = cfg.steps_for(cfg.simulate.duration);
    let result = mpc_simulate(controller.as_mut(), plant, &cfg.simulate.x0, steps, cfg.simulate.warm_start)?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(ws.path(TRAJECTORY_FILE))?);
    write_trajectory_csv(&mut file, &result, plant)?;
    std::io::Write::flush(&mut file)?;
    let summary = SimulationSummary {
        controller: if loaded.is_some() { "pinet" } else { "expert" }.into(),
        steps,
        success: result.success,
        cost: result.cost,
    };
    ws.write_json(SIMULATION_FILE, &summary)?;
    print_json(&summary)?;
    println!("wall time: {:.2} s", result.wall_time);
    Ok(summary)
}
