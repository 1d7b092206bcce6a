//! Dataset tables. Linear datasets hold one open-loop expert plan per
//! sample (`sample, step, x.., u..`); pendulum datasets hold closed-loop
//! expert runs (`trajectory, step, x.., u..`). The last row of every
//! sample carries the final state and empty control fields.

use std::path::Path;

use pinet_core::envs::{success_metric, trajectory_cost, LinearTeacher, PendulumTask, Plant};
use pinet_core::training::{Demonstration, OpenLoopSample};
use pinet_core::types::ControlSequence;

use crate::error::{CliError, CliResult};
use crate::io::{num, read_csv, write_csv};

fn header(index: &str, n: usize, m: usize) -> Vec<String> {
    let mut h = vec![index.to_string(), "step".to_string()];
    h.extend((0..n).map(|j| format!("x{j}")));
    h.extend((0..m).map(|j| format!("u{j}")));
    h
}

fn rows(index: usize, states: &[Vec<f64>], controls: &[Vec<f64>], m: usize) -> Vec<Vec<String>> {
    states
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mut row = vec![index.to_string(), i.to_string()];
            row.extend(x.iter().map(|&v| num(v)));
            match controls.get(i) {
                Some(u) => row.extend(u.iter().map(|&v| num(v))),
                None => row.extend(std::iter::repeat_n(String::new(), m)),
            }
            row
        })
        .collect()
}

/// States and controls of every sample, in file order.
type Runs = Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)>;

fn read_runs(path: &Path, index: &str, n: usize, m: usize) -> CliResult<Runs> {
    let (h, table) = read_csv(path)?;
    if h != header(index, n, m) {
        return Err(CliError::validation(format!("{}: unexpected columns {h:?}", path.display())));
    }
    let bad = |line: usize, what: &str| CliError::validation(format!("{} line {}: {what}", path.display(), line + 2));
    let mut runs: Runs = Vec::new();
    let mut closed = true;
    for (line, row) in table.iter().enumerate() {
        let id = row[0].ok_or_else(|| bad(line, "missing index"))? as usize;
        let step = row[1].ok_or_else(|| bad(line, "missing step"))? as usize;
        if step == 0 {
            if !closed || id != runs.len() {
                return Err(bad(line, "samples must be numbered consecutively and end with a final-state row"));
            }
            runs.push((Vec::new(), Vec::new()));
            closed = false;
        } else if closed || id + 1 != runs.len() || step != runs[id].0.len() {
            return Err(bad(line, "steps must be consecutive within a sample"));
        }
        let x: Option<Vec<f64>> = row[2..2 + n].iter().copied().collect();
        let x = x.ok_or_else(|| bad(line, "missing state value"))?;
        let run = runs.last_mut().expect("pushed above");
        run.0.push(x);
        let u = &row[2 + n..];
        if u.iter().all(Option::is_none) {
            closed = true;
        } else {
            let u: Option<Vec<f64>> = u.iter().copied().collect();
            run.1.push(u.ok_or_else(|| bad(line, "partially missing control"))?);
        }
    }
    if !closed {
        return Err(CliError::validation(format!("{}: last sample has no final-state row", path.display())));
    }
    Ok(runs)
}

pub fn write_linear(path: &Path, teacher: &LinearTeacher<f64>, samples: &[OpenLoopSample<f64>]) -> CliResult<()> {
    let (n, m) = (teacher.state_dim(), teacher.control_dim());
    let all = samples.iter().enumerate().flat_map(|(k, s)| {
        let controls: Vec<Vec<f64>> = (0..s.controls.horizon()).map(|i| s.controls.step(i).to_vec()).collect();
        let mut states = vec![s.x0.clone()];
        for u in &controls {
            let next = teacher.step(states.last().expect("non-empty"), u);
            states.push(next);
        }
        rows(k, &states, &controls, m)
    });
    write_csv(path, &header("sample", n, m), all)
}

pub fn read_linear(path: &Path, n: usize, m: usize, horizon: usize) -> CliResult<Vec<OpenLoopSample<f64>>> {
    read_runs(path, "sample", n, m)?
        .into_iter()
        .map(|(states, controls)| {
            if controls.len() != horizon {
                return Err(CliError::validation(format!(
                    "{}: plan of length {} where the manifest says {horizon}",
                    path.display(),
                    controls.len()
                )));
            }
            let flat = controls.concat();
            Ok(OpenLoopSample { x0: states[0].clone(), controls: ControlSequence::from_vec(horizon, m, flat)? })
        })
        .collect()
}

pub fn write_pendulum(path: &Path, demos: &[Demonstration<f64>]) -> CliResult<()> {
    let all = demos.iter().enumerate().flat_map(|(k, d)| rows(k, &d.states, &d.controls, 1));
    write_csv(path, &header("trajectory", 2, 1), all)
}

/// Demonstrations with cost and success recomputed on `task`.
pub fn read_pendulum(path: &Path, task: &PendulumTask<f64>) -> CliResult<Vec<Demonstration<f64>>> {
    Ok(read_runs(path, "trajectory", 2, 1)?
        .into_iter()
        .map(|(states, controls)| {
            let cost = trajectory_cost(
                &states,
                &controls,
                |x| task.state_cost(x),
                |x| task.state_cost(x),
                task.control_weight(),
            );
            let success = !controls.is_empty() && success_metric(&states, task.dt());
            Demonstration { states, controls, success, cost }
        })
        .collect())
}
