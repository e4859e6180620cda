//! Suite outputs: key-sorted JSON summary, aligned text table, per-category
//! CSV and the JSONL trajectory log.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::orchestrator::{write_jsonl, EpisodeResult};
use crate::state_space::canonical_json;

use super::metrics::{metrics_from_results, Metrics};
use super::HarnessError;

/// Published figures for the same three backtracking metrics, measured with
/// real models on a desktop benchmark. This simulator does not reproduce
/// them; they are printed for orientation only.
pub const REFERENCE_TASK_RATE: f64 = 0.358;
pub const REFERENCE_SUCCESS_RATE: f64 = 0.655;
pub const REFERENCE_AVG_STEPS: f64 = 2.72;

pub const TRAJECTORY_FILE: &str = "trajectories.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub variant: String,
    pub policy: String,
    pub metrics: Metrics,
    /// Episodes that ended with a diagnostic (policy errors, crashes).
    pub diagnostics: Vec<(String, String)>,
}

impl SuiteSummary {
    pub fn new(variant: &str, policy: &str, results: &[EpisodeResult]) -> Self {
        SuiteSummary {
            variant: variant.to_string(),
            policy: policy.to_string(),
            metrics: metrics_from_results(results),
            diagnostics: results
                .iter()
                .filter_map(|r| r.diagnostic.as_ref().map(|d| (r.episode_id.clone(), d.clone())))
                .collect(),
        }
    }
}

pub fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{:.1}%", x * 100.0))
}

pub fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.2}"))
}

pub fn summary_text(s: &SuiteSummary) -> String {
    let m = &s.metrics;
    let mut out = String::new();
    let _ = writeln!(out, "variant: {}   policy: {}   episodes: {}", s.variant, s.policy, m.episodes);
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<28}{:>10}{:>12}", "metric", "value", "reference");
    let _ = writeln!(out, "{:<28}{:>10}{:>12}", "Acc", pct(m.accuracy), "-");
    let _ = writeln!(
        out,
        "{:<28}{:>10}{:>12}",
        "Backtracking Task Rate",
        pct(m.backtracking_task_rate),
        pct(Some(REFERENCE_TASK_RATE))
    );
    let _ = writeln!(
        out,
        "{:<28}{:>10}{:>12}",
        "Backtrack Success Rate",
        pct(m.backtrack_success_rate),
        pct(Some(REFERENCE_SUCCESS_RATE))
    );
    let _ = writeln!(
        out,
        "{:<28}{:>10}{:>12}",
        "Average Backtrack Steps",
        num(m.avg_backtrack_steps),
        num(Some(REFERENCE_AVG_STEPS))
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<10}{:>10}{:>8}{:>10}", "category", "episodes", "done", "accuracy");
    for (class, c) in &m.per_category {
        let _ = writeln!(out, "{:<10}{:>10}{:>8}{:>10}", class, c.episodes, c.done, pct(c.accuracy));
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "Reference values are published results with real models on a desktop\n\
         benchmark. They are not reproducible in this simulator."
    );
    if !s.diagnostics.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "episodes with diagnostics: {}", s.diagnostics.len());
    }
    out
}

pub fn per_category_csv(m: &Metrics) -> String {
    let mut out = String::from("category,episodes,done,accuracy\n");
    for (class, c) in &m.per_category {
        let acc = c.accuracy.map_or_else(String::new, |a| format!("{a:.6}"));
        let _ = writeln!(out, "{class},{},{},{acc}", c.episodes, c.done);
    }
    out
}

fn write(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

/// Write all outputs of one suite run into `dir`.
pub fn write_suite_outputs(dir: &Path, summary: &SuiteSummary, results: &[EpisodeResult]) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let log_path = dir.join(TRAJECTORY_FILE);
    let mut log = Vec::new();
    for r in results {
        write_jsonl(&mut log, r).map_err(|e| HarnessError::io(&log_path, e))?;
    }
    write(&log_path, &log)?;
    write(&dir.join("summary.json"), canonical_json(summary).as_bytes())?;
    write(&dir.join("summary.txt"), summary_text(summary).as_bytes())?;
    write(&dir.join("per_category.csv"), per_category_csv(&summary.metrics).as_bytes())?;
    Ok(())
}
