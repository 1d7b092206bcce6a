//! Experiment configuration: profile defaults, JSON overrides, validation.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use pinet_core::envs::SUCCESS_WINDOW;
use pinet_core::experts::IlqrSettings;
use pinet_core::models::{FreezeSet, DYNAMICS_ID};
use pinet_core::training::{LossWeights, OptimizerConfig, PretrainConfig, TrainConfig};
use pinet_core::HyperParams;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Environment {
    Linear,
    Pendulum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Small sizes that run on a laptop in minutes.
    Desk,
    /// Full-size settings; guarded by the memory budget.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    /// `q = ||net(theta, theta_dot)||^2`, learned.
    Mlp,
    /// The known swing-up cost (the "frozen network" ablation).
    Teacher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dynamics_hidden: usize,
    pub cost: CostKind,
    pub cost_hidden: usize,
    pub cost_outputs: usize,
    pub separate_terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub n_train: usize,
    pub n_test: usize,
    /// Planning horizon of the expert (and of the linear demonstrations).
    pub horizon: usize,
    /// Control intervals per pendulum demonstration.
    pub steps: usize,
    pub warm_start: bool,
    pub ilqr: IlqrSettings,
    /// Keep every `stride`-th pendulum transition for network training.
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainSection {
    pub enabled: bool,
    pub settings: PretrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Closed-loop runs from random initial states.
    pub runs: usize,
    /// Seconds per run.
    pub duration: f64,
    pub warm_start: bool,
    /// Random (x, u) pairs for the one-step dynamics check.
    pub dynamics_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub x0: Vec<f64>,
    pub duration: f64,
    pub warm_start: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckConfig {
    pub instances: usize,
    pub step: f64,
    pub rel_tol: f64,
    pub abs_floor: f64,
    pub freeze: FreezeSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostmapConfig {
    pub theta_points: usize,
    pub theta_dot_points: usize,
    pub theta_range: [f64; 2],
    pub theta_dot_range: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub environment: Environment,
    pub profile: Profile,
    pub seed: u64,
    pub pi: HyperParams,
    /// Kernel iterations of warm-started MPC steps.
    pub warm_iterations: usize,
    pub models: ModelConfig,
    pub data: DataConfig,
    pub pretrain: PretrainSection,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub simulate: SimulateConfig,
    pub gradcheck: GradcheckConfig,
    pub costmap: CostmapConfig,
}

impl ExperimentConfig {
    pub fn defaults(environment: Environment, profile: Profile) -> Self {
        let paper = profile == Profile::Paper;
        let (pi, warm_iterations) = match (environment, paper) {
            (Environment::Linear, false) => (hp(0.2, 30, 30, 20), 20),
            (Environment::Linear, true) => (hp(0.2, 100, 200, 200), 20),
            (Environment::Pendulum, false) => (hp(0.005, 30, 30, 20), 10),
            (Environment::Pendulum, true) => (hp(0.005, 100, 30, 200), 20),
        };
        let data = match (environment, paper) {
            (Environment::Linear, _) => DataConfig {
                n_train: if paper { 950 } else { 200 },
                n_test: if paper { 50 } else { 20 },
                horizon: pi.horizon,
                steps: 0,
                warm_start: true,
                ilqr: IlqrSettings::default(),
                stride: 1,
            },
            (Environment::Pendulum, _) => DataConfig {
                n_train: if paper { 50 } else { 10 },
                n_test: if paper { 10 } else { 3 },
                horizon: 30,
                steps: 400,
                warm_start: true,
                ilqr: IlqrSettings::default(),
                stride: if paper { 1 } else { 10 },
            },
        };
        let pendulum = environment == Environment::Pendulum;
        let train = TrainConfig {
            epochs: match (environment, paper) {
                (Environment::Linear, false) => 10,
                (Environment::Linear, true) => 100,
                (Environment::Pendulum, false) => 5,
                (Environment::Pendulum, true) => 50,
            },
            batch: 8,
            freeze: if pendulum { [DYNAMICS_ID.to_string()].into() } else { FreezeSet::new() },
            weights: LossWeights { ctrl: 1.0, dynamics: 0.0, cost: if pendulum { 1e-3 } else { 0.0 } },
            optimizer: OptimizerConfig::default(),
            memory_budget_bytes: 2 << 30,
            goals: if pendulum { vec![vec![PI, 0.0], vec![-PI, 0.0]] } else { Vec::new() },
            wrap_angle: pendulum,
        };
        Self {
            experiment_id: format!("{}-{}", env_name(environment), if paper { "paper" } else { "desk" }),
            environment,
            profile,
            seed: 0,
            pi,
            warm_iterations,
            models: ModelConfig {
                dynamics_hidden: 12,
                cost: CostKind::Mlp,
                cost_hidden: 12,
                cost_outputs: 12,
                separate_terminal: false,
            },
            data,
            pretrain: PretrainSection {
                enabled: pendulum,
                settings: PretrainConfig { epochs: if paper { 200 } else { 100 }, ..Default::default() },
            },
            train,
            eval: EvalConfig { runs: 10, duration: 60.0, warm_start: true, dynamics_pairs: 100 },
            simulate: SimulateConfig {
                x0: if pendulum { vec![0.0, 0.0] } else { vec![1.0; 4] },
                duration: if pendulum { 60.0 } else { 1.0 },
                warm_start: true,
            },
            gradcheck: GradcheckConfig {
                instances: 20,
                step: 1e-6,
                rel_tol: 1e-4,
                abs_floor: 1e-7,
                freeze: FreezeSet::new(),
            },
            costmap: CostmapConfig {
                theta_points: 101,
                theta_dot_points: 101,
                theta_range: [-PI, PI],
                theta_dot_range: [-2.0 * PI, 2.0 * PI],
            },
        }
    }

    /// Profile defaults overlaid with the JSON file at `path` (if any) and
    /// the command-line overrides, then validated.
    pub fn resolve(path: Option<&Path>, seed: Option<u64>, profile: Option<Profile>) -> Result<Self, CliError> {
        let user = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::validation(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str::<Value>(&text)
                    .map_err(|e| CliError::validation(format!("{}: {e}", p.display())))?
            }
            None => Value::Object(Default::default()),
        };
        if !user.is_object() {
            return Err(CliError::validation("config must be a JSON object"));
        }
        fn field<T: serde::de::DeserializeOwned>(user: &Value, name: &str) -> Option<serde_json::Result<T>> {
            user.get(name).cloned().map(serde_json::from_value)
        }
        let environment = match field(&user, "environment") {
            Some(v) => v.map_err(|e| CliError::validation(format!("environment: {e}")))?,
            None => Environment::Pendulum,
        };
        let profile = match (profile, field(&user, "profile")) {
            (Some(p), _) => p,
            (None, Some(v)) => v.map_err(|e| CliError::validation(format!("profile: {e}")))?,
            (None, None) => Profile::Desk,
        };
        let mut merged = serde_json::to_value(Self::defaults(environment, profile)).expect("serializable");
        overlay(&mut merged, &user, "")?;
        merged["profile"] = serde_json::to_value(profile).expect("serializable");
        if let Some(s) = seed {
            merged["seed"] = s.into();
        }
        let cfg: Self = serde_json::from_value(merged).map_err(|e| CliError::validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::validation(msg));
        self.pi.validate().map_err(CliError::from)?;
        if self.experiment_id.is_empty() {
            return fail("experiment_id must not be empty".into());
        }
        if self.warm_iterations == 0 {
            return fail("warm_iterations must be at least 1".into());
        }
        let d = &self.data;
        if d.n_train == 0 {
            return fail("data.n_train must be at least 1".into());
        }
        if d.horizon == 0 || d.stride == 0 {
            return fail("data.horizon and data.stride must be at least 1".into());
        }
        match self.environment {
            Environment::Linear => {
                if d.horizon != self.pi.horizon {
                    return fail(format!(
                        "data.horizon ({}) must equal pi.horizon ({}) for open-loop imitation",
                        d.horizon, self.pi.horizon
                    ));
                }
            }
            Environment::Pendulum => {
                if d.steps < d.horizon {
                    return fail(format!("data.steps ({}) must be at least data.horizon ({})", d.steps, d.horizon));
                }
                let m = &self.models;
                if m.dynamics_hidden == 0 || m.cost_hidden == 0 || m.cost_outputs == 0 {
                    return fail("model layer sizes must be positive".into());
                }
            }
        }
        if self.train.batch == 0 || self.pretrain.settings.batch == 0 {
            return fail("batch sizes must be at least 1".into());
        }
        if !(self.train.optimizer.lr > 0.0) || !(self.pretrain.settings.optimizer.lr > 0.0) {
            return fail("learning rates must be positive".into());
        }
        if self.eval.runs == 0 || !(self.eval.duration > 0.0) || !(self.simulate.duration > 0.0) {
            return fail("eval.runs, eval.duration and simulate.duration must be positive".into());
        }
        let state_dim = match self.environment {
            Environment::Linear => 4,
            Environment::Pendulum => 2,
        };
        if self.simulate.x0.len() != state_dim || self.simulate.x0.iter().any(|v| !v.is_finite()) {
            return fail(format!("simulate.x0 must hold {state_dim} finite values"));
        }
        let g = &self.gradcheck;
        if g.instances == 0 || !(g.step > 0.0) || !(g.rel_tol > 0.0) || !(g.abs_floor >= 0.0) {
            return fail("gradcheck needs instances >= 1 and positive step and tolerances".into());
        }
        let c = &self.costmap;
        if c.theta_points < 2
            || c.theta_dot_points < 2
            || !(c.theta_range[0] < c.theta_range[1])
            || !(c.theta_dot_range[0] < c.theta_dot_range[1])
        {
            return fail("costmap needs at least 2 points per axis and increasing ranges".into());
        }
        Ok(())
    }

    /// Closed-loop steps for a run of `seconds`.
    pub fn steps_for(&self, seconds: f64) -> usize {
        (seconds / self.dt()).round() as usize
    }

    pub fn dt(&self) -> f64 {
        match self.environment {
            Environment::Linear => pinet_core::envs::LINEAR_DT,
            Environment::Pendulum => pinet_core::envs::PENDULUM_DT,
        }
    }
}

fn hp(sigma: f64, trajectories: usize, horizon: usize, iterations: usize) -> HyperParams {
    HyperParams { lambda: 0.01, nu: 1500.0, sigma, trajectories, horizon, iterations }
}

pub fn env_name(e: Environment) -> &'static str {
    match e {
        Environment::Linear => "linear",
        Environment::Pendulum => "pendulum",
    }
}

/// Writes `user` over `base`, refusing keys the defaults do not have.
/// Objects merge recursively; everything else is replaced.
fn overlay(base: &mut Value, user: &Value, at: &str) -> Result<(), CliError> {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) => {
            for (k, v) in u {
                let path = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
                match b.get_mut(k) {
                    Some(slot) => overlay(slot, v, &path)?,
                    None => return Err(CliError::validation(format!("unknown config key '{path}'"))),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v.clone();
            Ok(())
        }
    }
}

/// The success window must fit in a closed-loop run.
pub fn check_success_window(cfg: &ExperimentConfig) -> Result<(), CliError> {
    if cfg.environment == Environment::Pendulum && cfg.eval.duration < SUCCESS_WINDOW {
        return Err(CliError::validation(format!(
            "eval.duration must be at least {SUCCESS_WINDOW} s to detect a swing-up"
        )));
    }
    Ok(())
}
