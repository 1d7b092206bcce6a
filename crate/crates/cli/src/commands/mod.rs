//! One module per verb. Every verb resolves its inputs, takes the
//! experiment-directory lock, writes its resolved configuration next to
//! its outputs and prints a short JSON summary on stdout.

mod costmap;
mod eval;
mod gen_data;
mod gradcheck;
mod simulate;
mod train;

use std::path::{Path, PathBuf};

use pinet_core::envs::{LinearTeacher, PendulumTask, LINEAR_CONTROL_DIM, LINEAR_STATE_DIM};
use pinet_core::training::{transitions, Demonstration, MpcSample, OpenLoopSample};
use pinet_core::{Models, SeededRng};

pub use costmap::export_costmap;
pub use eval::{eval, MetricsReport};
pub use gen_data::gen_data;
pub use gradcheck::gradcheck;
pub use simulate::simulate;
pub use train::train;

use crate::config::{env_name, Environment, ExperimentConfig};
use crate::dataset::{read_linear, read_pendulum};
use crate::error::{CliError, CliResult};
use crate::io::{Checkpoint, Manifest, Teacher, Workspace};

/// Substreams of the experiment seed.
pub(crate) mod stream {
    pub const TEACHER: u64 = 0;
    pub const DATASET: u64 = 1;
    pub const MODEL_INIT: u64 = 2;
    pub const TRAINING: u64 = 3;
    pub const PRETRAIN: u64 = 4;
    pub const EVAL_STARTS: u64 = 5;
    pub const EVAL_NOISE: u64 = 6;
    pub const SIMULATE: u64 = 7;
    pub const GRADCHECK: u64 = 8;
    pub const DYNAMICS_PAIRS: u64 = 9;
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRAIN_FILE: &str = "train.csv";
pub const TEST_FILE: &str = "test.csv";

/// Everything a verb needs besides its own flags.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    pub force: bool,
}

impl Invocation {
    pub fn root(&self) -> SeededRng {
        SeededRng::new(self.cfg.seed)
    }

    /// Locks the output directory and writes `config.<verb>.json` there.
    fn workspace(&self, verb: &str, outputs: &[&str]) -> CliResult<Workspace> {
        let config = format!("config.{verb}.json");
        let mut all = outputs.to_vec();
        all.push(&config);
        let ws = Workspace::open(&self.out, &all, self.force)?;
        ws.write_json(&config, &self.cfg)?;
        Ok(ws)
    }
}

/// A dataset read back from disk.
pub(crate) enum Dataset {
    Linear { teacher: LinearTeacher<f64>, train: Vec<OpenLoopSample<f64>>, test: Vec<OpenLoopSample<f64>> },
    Pendulum { train: Vec<Demonstration<f64>>, test: Vec<Demonstration<f64>> },
}

pub(crate) fn load_dataset(dir: &Path, cfg: &ExperimentConfig) -> CliResult<(Manifest, Dataset)> {
    let manifest = Manifest::load(&dir.join(MANIFEST_FILE))?;
    if manifest.environment != cfg.environment {
        return Err(CliError::validation(format!(
            "dataset in {} was generated for the {} environment, the config is for {}",
            dir.display(),
            env_name(manifest.environment),
            env_name(cfg.environment)
        )));
    }
    let data = match &manifest.teacher {
        Teacher::Linear(t) => {
            let read = |f: &str| read_linear(&dir.join(f), LINEAR_STATE_DIM, LINEAR_CONTROL_DIM, manifest.horizon);
            Dataset::Linear { teacher: t.clone(), train: read(&manifest.train_file)?, test: read(&manifest.test_file)? }
        }
        Teacher::Pendulum { .. } => {
            let task = PendulumTask::default();
            let read = |f: &str| read_pendulum(&dir.join(f), &task);
            Dataset::Pendulum { train: read(&manifest.train_file)?, test: read(&manifest.test_file)? }
        }
    };
    let (n_train, n_test) = match &data {
        Dataset::Linear { train, test, .. } => (train.len(), test.len()),
        Dataset::Pendulum { train, test } => (train.len(), test.len()),
    };
    if (n_train, n_test) != (manifest.expert.train.count, manifest.expert.test.count) {
        return Err(CliError::validation(format!(
            "dataset files in {} do not match the manifest sizes",
            dir.display()
        )));
    }
    Ok((manifest, data))
}

/// Every `stride`-th transition of the demonstrations.
pub(crate) fn strided(demos: &[Demonstration<f64>], stride: usize) -> Vec<MpcSample<f64>> {
    transitions(demos).into_iter().step_by(stride).collect()
}

pub(crate) fn load_checkpoint(path: &Path, cfg: &ExperimentConfig) -> CliResult<(Checkpoint, Models)> {
    let ck = Checkpoint::load(path)?;
    if ck.environment != cfg.environment {
        return Err(CliError::validation(format!(
            "checkpoint {} is for the {} environment, the config is for {}",
            path.display(),
            env_name(ck.environment),
            env_name(cfg.environment)
        )));
    }
    let models = ck.build_models()?;
    let n = match cfg.environment {
        Environment::Linear => LINEAR_STATE_DIM,
        Environment::Pendulum => 2,
    };
    if models.state_dim() != n {
        return Err(CliError::validation(format!(
            "checkpoint models have {} states, expected {n}",
            models.state_dim()
        )));
    }
    Ok((ck, models))
}

/// Where the network or expert under test comes from.
#[derive(Debug, Clone)]
pub enum Source {
    Checkpoint(PathBuf),
    Expert,
}

impl Source {
    pub fn from_flags(checkpoint: Option<PathBuf>, expert: bool) -> CliResult<Self> {
        match (checkpoint, expert) {
            (Some(p), false) => Ok(Source::Checkpoint(p)),
            (None, true) => Ok(Source::Expert),
            (Some(_), true) => Err(CliError::validation("pass either --checkpoint or --expert, not both")),
            (None, false) => Err(CliError::validation("pass --checkpoint PATH or --expert")),
        }
    }
}

pub(crate) fn print_json<T: serde::Serialize>(v: &T) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}
