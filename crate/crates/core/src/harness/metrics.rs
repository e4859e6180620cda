//! Suite metrics. Every figure is a sum or count over per-episode counters,
//! so the result does not depend on episode order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::orchestrator::{EpisodeResult, LogLine, Outcome};
use crate::state_space::Mode;
use crate::status::{BackStatus, ExecStatus};

use super::HarnessError;

/// The counters metrics are computed from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeCounters {
    pub episode_id: String,
    pub category: String,
    pub outcome: Outcome,
    pub steps_used: u32,
    pub backtrack_attempts: u32,
    pub backtrack_successes: u32,
    pub backtrack_steps_total: u32,
}

impl EpisodeCounters {
    pub fn from_result(r: &EpisodeResult) -> Self {
        EpisodeCounters {
            episode_id: r.episode_id.clone(),
            category: category_of(&r.episode_id),
            outcome: r.outcome,
            steps_used: r.steps_used,
            backtrack_attempts: r.backtrack_attempts,
            backtrack_successes: r.backtrack_successes,
            backtrack_steps_total: r.backtrack_steps_total,
        }
    }
}

/// Second `/`-separated field of an episode id (`variant/class/digest`).
pub fn category_of(episode_id: &str) -> String {
    episode_id.split('/').nth(1).unwrap_or("").to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub episodes: u64,
    pub done: u64,
    pub accuracy: Option<f64>,
}

/// Rates with an empty denominator are `None` (serialized as `null`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub episodes: u64,
    pub accuracy: Option<f64>,
    pub backtracking_task_rate: Option<f64>,
    pub backtrack_success_rate: Option<f64>,
    pub avg_backtrack_steps: Option<f64>,
    pub per_category: BTreeMap<String, CategoryMetrics>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn compute_metrics(counters: &[EpisodeCounters]) -> Metrics {
    let episodes = counters.len() as u64;
    let done = counters.iter().filter(|c| c.outcome == Outcome::Done).count() as u64;
    let with_backtrack = counters.iter().filter(|c| c.backtrack_attempts >= 1).count() as u64;
    let attempts: u64 = counters.iter().map(|c| c.backtrack_attempts as u64).sum();
    let successes: u64 = counters.iter().map(|c| c.backtrack_successes as u64).sum();
    let steps: u64 = counters.iter().map(|c| c.backtrack_steps_total as u64).sum();
    let mut per_category: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for c in counters {
        let entry = per_category.entry(c.category.clone()).or_default();
        entry.0 += 1;
        entry.1 += (c.outcome == Outcome::Done) as u64;
    }
    Metrics {
        episodes,
        accuracy: ratio(done, episodes),
        backtracking_task_rate: ratio(with_backtrack, episodes),
        backtrack_success_rate: ratio(successes, attempts),
        avg_backtrack_steps: ratio(steps, attempts),
        per_category: per_category
            .into_iter()
            .map(|(k, (n, d))| {
                (
                    k,
                    CategoryMetrics {
                        episodes: n,
                        done: d,
                        accuracy: ratio(d, n),
                    },
                )
            })
            .collect(),
    }
}

pub fn metrics_from_results(results: &[EpisodeResult]) -> Metrics {
    compute_metrics(&results.iter().map(EpisodeCounters::from_result).collect::<Vec<_>>())
}

/// Rebuild per-episode counters from log lines alone.
///
/// The last line of each episode is its verdict. A backtrack attempt is a
/// maximal run of Backtrack-mode lines (the verdict included, so an attempt
/// that failed before touching the environment still counts); it succeeded
/// iff its last line carries RECOVERED.
pub fn counters_from_log(lines: &[LogLine]) -> Result<Vec<EpisodeCounters>, HarnessError> {
    let mut order: Vec<&str> = Vec::new();
    let mut grouped: BTreeMap<&str, Vec<&LogLine>> = BTreeMap::new();
    for line in lines {
        let id = line.episode_id.as_str();
        if !grouped.contains_key(id) {
            order.push(id);
        }
        grouped.entry(id).or_default().push(line);
    }
    order
        .into_iter()
        .map(|id| {
            let episode = &grouped[id];
            let (verdict, steps) = episode.split_last().expect("grouped episodes are nonempty");
            if verdict.action.is_some() || verdict.state_from != verdict.state_to {
                return Err(HarnessError::Log(format!("episode {id} has no verdict line")));
            }
            let outcome = match verdict.exec_status {
                Some(ExecStatus::Done) => Outcome::Done,
                Some(ExecStatus::Fail) => Outcome::Fail,
                None => Outcome::BudgetExhausted,
                Some(other) => return Err(HarnessError::Log(format!("episode {id} ends with {other}"))),
            };
            let mut attempts = 0;
            let mut successes = 0;
            let mut prev: Option<&LogLine> = None;
            for line in episode.iter() {
                let in_bt = line.mode == Mode::Backtrack;
                let prev_bt = prev.is_some_and(|p| p.mode == Mode::Backtrack);
                if in_bt && !prev_bt {
                    attempts += 1;
                }
                if !in_bt && prev_bt && prev.and_then(|p| p.back_status) == Some(BackStatus::Recovered) {
                    successes += 1;
                }
                prev = Some(line);
            }
            Ok(EpisodeCounters {
                episode_id: id.to_string(),
                category: category_of(id),
                outcome,
                steps_used: steps.len() as u32,
                backtrack_attempts: attempts,
                backtrack_successes: successes,
                backtrack_steps_total: steps.iter().filter(|l| l.mode == Mode::Backtrack).count() as u32,
            })
        })
        .collect()
}
