use serde::Serialize;

use pinet_core::controller::{gradcheck as check_instance, tiny_instance, GradcheckReport};

use super::{print_json, stream, Invocation};
use crate::error::{CliError, CliResult};

pub const GRADCHECK_FILE: &str = "gradcheck.json";

#[derive(Debug, Clone, Serialize)]
pub struct SegmentSummary {
    pub id: String,
    pub max_rel_err: f64,
    pub max_abs_diff: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckSummary {
    pub passed: bool,
    pub instances: usize,
    pub rel_tol: f64,
    pub abs_floor: f64,
    /// Worst relative error per segment over all instances.
    pub segments: Vec<SegmentSummary>,
    pub reports: Vec<GradcheckReport>,
}

/// Reverse pass against central differences on seeded tiny instances.
/// A failure writes the report, lists the worst coordinates and exits
/// with the numeric status.
pub fn gradcheck(inv: &Invocation) -> CliResult<GradcheckSummary> {
    let cfg = &inv.cfg;
    let g = &cfg.gradcheck;
    let ws = inv.workspace("gradcheck", &[GRADCHECK_FILE])?;
    let root = inv.root().substream(stream::GRADCHECK);
    let mut reports = Vec::with_capacity(g.instances);
    for i in 0..g.instances {
        let rng = root.substream(i as u64);
        let (x0, models, hp) = tiny_instance::<f64>(&rng)?;
        reports.push(check_instance(&x0, &models, &hp, &rng.substream(1), &g.freeze, g.step, g.rel_tol, g.abs_floor)?);
    }
    let mut segments: Vec<SegmentSummary> = Vec::new();
    for seg in reports.iter().flat_map(|r| &r.segments) {
        match segments.iter_mut().find(|s| s.id == seg.id) {
            Some(s) => {
                s.max_rel_err = s.max_rel_err.max(seg.max_rel_err);
                s.max_abs_diff = s.max_abs_diff.max(seg.max_abs_diff);
                s.passed &= seg.passed;
            }
            None => segments.push(SegmentSummary {
                id: seg.id.clone(),
                max_rel_err: seg.max_rel_err,
                max_abs_diff: seg.max_abs_diff,
                passed: seg.passed,
            }),
        }
    }
    let summary = GradcheckSummary {
        passed: reports.iter().all(|r| r.passed),
        instances: g.instances,
        rel_tol: g.rel_tol,
        abs_floor: g.abs_floor,
        segments,
        reports,
    };
    ws.write_json(GRADCHECK_FILE, &summary)?;
    for s in &summary.segments {
        println!(
            "{:<16} max rel err {:.3e}  max abs diff {:.3e}  {}",
            s.id,
            s.max_rel_err,
            s.max_abs_diff,
            if s.passed { "ok" } else { "FAIL" }
        );
    }
    if !summary.passed {
        let worst: Vec<String> = summary
            .reports
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.segments.iter().filter(|s| !s.passed).map(move |s| (i, s)))
            .map(|(i, s)| {
                format!(
                    "instance {i} {}[{}]: analytic {:e} numeric {:e}",
                    s.id,
                    s.worst_index.map_or("-".into(), |k| k.to_string()),
                    s.worst_analytic,
                    s.worst_numeric
                )
            })
            .collect();
        return Err(CliError::numeric(format!("gradient check failed:\n  {}", worst.join("\n  "))));
    }
    print_json(&serde_json::json!({ "passed": true, "instances": summary.instances }))?;
    Ok(summary)
}
