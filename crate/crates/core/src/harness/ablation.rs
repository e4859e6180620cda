//! Full configuration against the two ablations, on the same worlds.

use serde::{Deserialize, Serialize};

use crate::orchestrator::{AblationFlags, EpisodeResult, Outcome};

use super::manifest::SuiteWorld;
use super::report::{num, pct, SuiteSummary};
use super::suite::{run_worlds, SuiteConfig};
use super::HarnessError;

pub const VARIANTS: [(&str, AblationFlags); 3] = [
    (
        "full",
        AblationFlags {
            enable_backtrack: true,
            enable_tracker: true,
        },
    ),
    (
        "no-backtrack",
        AblationFlags {
            enable_backtrack: false,
            enable_tracker: true,
        },
    ),
    (
        "no-tracker",
        AblationFlags {
            enable_backtrack: true,
            enable_tracker: false,
        },
    ),
];

pub struct AblationRun {
    pub variant: String,
    pub results: Vec<EpisodeResult>,
    pub summary: SuiteSummary,
}

impl AblationRun {
    pub fn successes(&self) -> usize {
        self.results.iter().filter(|r| r.outcome == Outcome::Done).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub episodes: u64,
    pub done: u64,
    pub accuracy: Option<f64>,
    pub backtracking_task_rate: Option<f64>,
    pub backtrack_success_rate: Option<f64>,
    pub avg_backtrack_steps: Option<f64>,
}

pub fn run_ablations(worlds: &[SuiteWorld], base: &SuiteConfig) -> Result<Vec<AblationRun>, HarnessError> {
    VARIANTS
        .iter()
        .map(|(name, flags)| {
            let mut config = base.clone();
            config.variant = name.to_string();
            config.episode.ablation = *flags;
            let results = run_worlds(worlds, &config)?;
            let summary = SuiteSummary::new(name, base.policy.name(), &results);
            Ok(AblationRun {
                variant: name.to_string(),
                results,
                summary,
            })
        })
        .collect()
}

pub fn ablation_rows(runs: &[AblationRun]) -> Vec<AblationRow> {
    runs.iter()
        .map(|r| {
            let m = &r.summary.metrics;
            AblationRow {
                variant: r.variant.clone(),
                episodes: m.episodes,
                done: r.successes() as u64,
                accuracy: m.accuracy,
                backtracking_task_rate: m.backtracking_task_rate,
                backtrack_success_rate: m.backtrack_success_rate,
                avg_backtrack_steps: m.avg_backtrack_steps,
            }
        })
        .collect()
}

pub fn ablation_table(rows: &[AblationRow]) -> String {
    let mut out = format!(
        "{:<14}{:>8}{:>8}{:>10}{:>14}{:>14}{:>12}\n",
        "variant", "done", "of", "Acc", "BT task rate", "BT success", "avg steps"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<14}{:>8}{:>8}{:>10}{:>14}{:>14}{:>12}\n",
            r.variant,
            r.done,
            r.episodes,
            pct(r.accuracy),
            pct(r.backtracking_task_rate),
            pct(r.backtrack_success_rate),
            num(r.avg_backtrack_steps)
        ));
    }
    out
}
