//! On-disk artifacts: the experiment directory and its lock, datasets,
//! checkpoints and CSV tables.

use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use pinet_core::envs::LinearTeacher;
use pinet_core::models::ModelsSpec;
use pinet_core::training::{EpochRecord, EvalLosses, OptimizerState, PretrainRecord};
use pinet_core::{HyperParams, Models, Params};

use crate::config::Environment;
use crate::error::{CliError, CliResult};

pub const LOCK_FILE: &str = ".pinet.lock";
pub const DATASET_FORMAT: &str = "pinet-dataset";
pub const CHECKPOINT_FORMAT: &str = "pinet-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

/// An experiment directory held under its lock file for the lifetime of
/// the value.
#[derive(Debug)]
pub struct Workspace {
    dir: PathBuf,
    lock: PathBuf,
}

impl Workspace {
    /// Creates `dir` if needed, takes the lock, and refuses to continue if
    /// any of `outputs` exists unless `force` is set.
    pub fn open(dir: &Path, outputs: &[&str], force: bool) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        let lock = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(_) => {}
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(CliError::validation(format!(
                    "{} is locked by another invocation (delete {} if it is stale)",
                    dir.display(),
                    lock.display()
                )))
            }
            Err(e) => return Err(e.into()),
        }
        let ws = Self { dir: dir.to_path_buf(), lock };
        if !force {
            let existing: Vec<&str> = outputs.iter().copied().filter(|f| ws.path(f).exists()).collect();
            if !existing.is_empty() {
                return Err(CliError::validation(format!(
                    "refusing to overwrite {} in {} (pass --force)",
                    existing.join(", "),
                    dir.display()
                )));
            }
        }
        Ok(ws)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        write_json(&self.path(name), value)
    }
}

impl Drop for Workspace {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

/// Shortest text that parses back to the same value.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of a numeric CSV; empty fields read as `None`.
pub fn read_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<Option<f64>>>)> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                if f.is_empty() {
                    Ok(None)
                } else {
                    f.parse::<f64>().map(Some).map_err(|_| {
                        CliError::validation(format!("{} line {}: '{f}' is not a number", path.display(), i + 2))
                    })
                }
            })
            .collect::<CliResult<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Ground truth the dataset was generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Teacher {
    Linear(LinearTeacher<f64>),
    Pendulum { dt: f64, gain: f64, r: f64 },
}

/// Expert performance on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub count: usize,
    /// Pendulum only.
    pub success_rate: Option<f64>,
    /// Mean trajectory cost; `None` for an empty split.
    pub mean_cost: Option<f64>,
}

impl SplitMetrics {
    pub fn from_runs(costs: &[f64], successes: Option<&[bool]>) -> Self {
        let n = costs.len();
        let mean = |s: f64| (n > 0).then(|| s / n as f64);
        Self {
            count: n,
            success_rate: successes.and_then(|s| mean(s.iter().filter(|&&b| b).count() as f64)),
            mean_cost: mean(costs.iter().sum()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertMetrics {
    pub train: SplitMetrics,
    pub test: SplitMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub experiment_id: String,
    pub environment: Environment,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub horizon: usize,
    /// Control intervals per pendulum demonstration.
    pub steps: usize,
    /// Demonstrations dropped because they diverged.
    pub excluded: usize,
    pub teacher: Teacher,
    pub expert: ExpertMetrics,
    pub train_file: String,
    pub test_file: String,
}

impl Manifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let value: serde_json::Value = read_json(path)?;
        check_format(&value, DATASET_FORMAT, path)?;
        Ok(serde_json::from_value(value)?)
    }
}

fn check_format(value: &serde_json::Value, format: &str, path: &Path) -> CliResult<()> {
    if value.get("format").and_then(|v| v.as_str()) != Some(format) {
        return Err(CliError::validation(format!("{} is not a {format} file", path.display())));
    }
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => Ok(()),
        Some(v) => Err(CliError::validation(format!(
            "{} has {format} version {v}; this build reads version {FORMAT_VERSION}",
            path.display()
        ))),
        None => Err(CliError::validation(format!("{} has no version field", path.display()))),
    }
}

/// Trained (or pre-trained) network parameters plus what is needed to
/// resume training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub experiment_id: String,
    pub environment: Environment,
    /// Epoch whose parameters these are; `None` before any training epoch.
    pub epoch: Option<usize>,
    pub models: ModelsSpec,
    pub params: Params,
    pub pi: HyperParams,
    pub warm_iterations: usize,
    /// Epoch numbering continues from here on resume.
    pub next_epoch: usize,
    pub optimizer: Option<OptimizerState>,
    pub history: Vec<EpochRecord>,
}

impl Checkpoint {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        experiment_id: &str,
        environment: Environment,
        epoch: Option<usize>,
        models: &Models,
        params: Params,
        pi: HyperParams,
        warm_iterations: usize,
        next_epoch: usize,
        optimizer: Option<OptimizerState>,
        history: Vec<EpochRecord>,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: FORMAT_VERSION,
            experiment_id: experiment_id.into(),
            environment,
            epoch,
            models: models.spec(),
            params,
            pi,
            warm_iterations,
            next_epoch,
            optimizer,
            history,
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let value: serde_json::Value = read_json(path)?;
        check_format(&value, CHECKPOINT_FORMAT, path)?;
        Ok(serde_json::from_value(value)?)
    }

    pub fn build_models(&self) -> CliResult<Models> {
        let mut m = Models::from_spec(&self.models)?;
        m.unpack(&self.params)?;
        Ok(m)
    }
}

fn loss_fields(l: &EvalLosses) -> [String; 4] {
    [opt(l.ctrl), opt(l.dynamics), opt(l.cost), opt(l.total)]
}

pub fn write_history(path: &Path, history: &[EpochRecord]) -> CliResult<()> {
    let header: Vec<String> = ["epoch", "lr"]
        .into_iter()
        .map(String::from)
        .chain(["train", "test"].iter().flat_map(|s| ["ctrl", "dynamics", "cost", "total"].map(|c| format!("{s}_{c}"))))
        .collect();
    let rows = history.iter().map(|r| {
        let mut row = vec![r.epoch.to_string(), num(r.lr)];
        row.extend(loss_fields(&r.train));
        row.extend(loss_fields(&r.test));
        row
    });
    write_csv(path, &header, rows)
}

pub fn write_pretrain_history(path: &Path, history: &[PretrainRecord]) -> CliResult<()> {
    let header = ["epoch", "lr", "train", "test"].map(String::from);
    write_csv(path, &header, history.iter().map(|r| vec![r.epoch.to_string(), num(r.lr), num(r.train), opt(r.test)]))
}
