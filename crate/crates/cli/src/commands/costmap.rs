use pinet_core::models::{PendulumTeacherCost, StateCost};

use super::{load_checkpoint, print_json, Invocation, Source};
use crate::config::Environment;
use crate::error::{CliError, CliResult};
use crate::io::{num, write_csv};

pub const COSTMAP_FILE: &str = "costmap.csv";

/// `n` points from `lo` to `hi`; both ends and a symmetric midpoint are hit
/// exactly.
fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            lo * (1.0 - t) + hi * t
        })
        .collect()
}

/// Evaluates the running cost on a `theta x theta_dot` grid and writes
/// `(theta, theta_dot, q)` rows, `theta` varying slowest.
pub fn export_costmap(inv: &Invocation, source: &Source) -> CliResult<usize> {
    let cfg = &inv.cfg;
    if cfg.environment != Environment::Pendulum {
        return Err(CliError::validation("cost maps are defined for the pendulum environment"));
    }
    let loaded = match source {
        Source::Checkpoint(p) => Some(load_checkpoint(p, cfg)?.1),
        Source::Expert => None,
    };
    let teacher = PendulumTeacherCost;
    let q: &dyn StateCost<f64> = match &loaded {
        Some(m) => m.running_cost.as_ref(),
        None => &teacher,
    };
    if q.state_dim() != 2 {
        return Err(CliError::validation(format!(
            "cost maps need a two-state cost model, this one takes {}",
            q.state_dim()
        )));
    }
    let ws = inv.workspace("export-costmap", &[COSTMAP_FILE])?;
    let c = &cfg.costmap;
    let thetas = grid(c.theta_range[0], c.theta_range[1], c.theta_points);
    let rates = grid(c.theta_dot_range[0], c.theta_dot_range[1], c.theta_dot_points);
    let rows =
        thetas.iter().flat_map(|&th| rates.iter().map(move |&om| vec![num(th), num(om), num(q.eval(&[th, om]))]));
    write_csv(&ws.path(COSTMAP_FILE), &["theta", "theta_dot", "q"].map(String::from), rows)?;
    let count = thetas.len() * rates.len();
    print_json(&serde_json::json!({ "rows": count, "file": ws.path(COSTMAP_FILE) }))?;
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_hits_ends_and_middle() {
        let g = grid(-PI, PI, 101);
        assert_eq!((g[0], g[50], g[100]), (-PI, 0.0, PI));
        let g = grid(-2.0 * PI, 2.0 * PI, 101);
        assert_eq!(g[50], 0.0);
    }
}
