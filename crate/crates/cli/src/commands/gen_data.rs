use pinet_core::envs::{sample_linear_teacher, PENDULUM_DT, PENDULUM_GAIN, PENDULUM_R};
use pinet_core::experts::lqr_objective;
use pinet_core::training::{build_linear_dataset, build_pendulum_demos, PendulumDataConfig};

use super::{print_json, stream, Invocation, MANIFEST_FILE, TEST_FILE, TRAIN_FILE};
use crate::config::Environment;
use crate::dataset::{write_linear, write_pendulum};
use crate::error::CliResult;
use crate::io::{ExpertMetrics, Manifest, SplitMetrics, Teacher, DATASET_FORMAT, FORMAT_VERSION};

/// Generates expert demonstrations and their manifest.
pub fn gen_data(inv: &Invocation) -> CliResult<Manifest> {
    let cfg = &inv.cfg;
    let ws = inv.workspace("gen-data", &[MANIFEST_FILE, TRAIN_FILE, TEST_FILE])?;
    let root = inv.root();
    let d = &cfg.data;
    let (teacher, expert, excluded) = match cfg.environment {
        Environment::Linear => {
            let teacher = sample_linear_teacher::<f64>(&root.substream(stream::TEACHER))?;
            let (train, test) =
                build_linear_dataset(&teacher, &root.substream(stream::DATASET), d.n_train, d.n_test, d.horizon)?;
            write_linear(&ws.path(TRAIN_FILE), &teacher, &train)?;
            write_linear(&ws.path(TEST_FILE), &teacher, &test)?;
            let problem = teacher.lqr_problem(d.horizon)?;
            let split = |s: &[pinet_core::training::OpenLoopSample<f64>]| {
                let costs: Vec<f64> = s.iter().map(|s| lqr_objective(&problem, &s.x0, &s.controls)).collect();
                SplitMetrics::from_runs(&costs, None)
            };
            let expert = ExpertMetrics { train: split(&train), test: split(&test) };
            (Teacher::Linear(teacher), expert, 0)
        }
        Environment::Pendulum => {
            let pcfg = PendulumDataConfig {
                n_train: d.n_train,
                n_test: d.n_test,
                steps: d.steps,
                horizon: d.horizon,
                warm_start: d.warm_start,
                ilqr: d.ilqr,
            };
            let demos = build_pendulum_demos::<f64>(&root.substream(stream::DATASET), &pcfg)?;
            write_pendulum(&ws.path(TRAIN_FILE), &demos.train)?;
            write_pendulum(&ws.path(TEST_FILE), &demos.test)?;
            let split = |s: &[pinet_core::training::Demonstration<f64>]| {
                let costs: Vec<f64> = s.iter().map(|d| d.cost).collect();
                let ok: Vec<bool> = s.iter().map(|d| d.success).collect();
                SplitMetrics::from_runs(&costs, Some(&ok))
            };
            let expert = ExpertMetrics { train: split(&demos.train), test: split(&demos.test) };
            (Teacher::Pendulum { dt: PENDULUM_DT, gain: PENDULUM_GAIN, r: PENDULUM_R }, expert, demos.excluded)
        }
    };
    let manifest = Manifest {
        format: DATASET_FORMAT.into(),
        version: FORMAT_VERSION,
        experiment_id: cfg.experiment_id.clone(),
        environment: cfg.environment,
        seed: cfg.seed,
        n_train: d.n_train,
        n_test: d.n_test,
        horizon: d.horizon,
        steps: if cfg.environment == Environment::Pendulum { d.steps } else { 0 },
        excluded,
        teacher,
        expert,
        train_file: TRAIN_FILE.into(),
        test_file: TEST_FILE.into(),
    };
    ws.write_json(MANIFEST_FILE, &manifest)?;
    print_json(&serde_json::json!({ "dataset": ws.dir(), "expert": manifest.expert, "excluded": excluded }))?;
    Ok(manifest)
}
