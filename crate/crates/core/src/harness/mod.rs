//! Suites of episodes: world manifests, batch runs, metrics, ablations,
//! replay and log audits.

use std::path::Path;

use thiserror::Error;

use crate::sim_env::{GenParamError, WorldError};

pub mod ablation;
pub mod audit;
pub mod manifest;
pub mod metrics;
pub mod replay;
pub mod report;
pub mod suite;

pub use ablation::{ablation_rows, ablation_table, run_ablations, AblationRow, AblationRun, VARIANTS};
pub use audit::{no_revisit_violations, RevisitViolation};
pub use manifest::{
    forced_outcome_suite, generate_suite, load_manifest, load_world, write_worlds, Manifest, ManifestEntry, SuiteWorld,
};
pub use metrics::{
    compute_metrics, counters_from_log, metrics_from_results, CategoryMetrics, EpisodeCounters, Metrics,
};
pub use replay::{digest_of, replay, Divergence, ReplayReport};
pub use report::{summary_text, write_suite_outputs, SuiteSummary, TRAJECTORY_FILE};
pub use suite::{episode_id, run_world, run_worlds, PolicyChoice, SuiteConfig, MAX_PARALLELISM};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("world digest mismatch: manifest says {expected}, file hashes to {found}")]
    WorldDigestMismatch { expected: String, found: String },
    #[error("replay of {episode_id}: {reason}")]
    ReplayWorldMismatch { episode_id: String, reason: String },
    #[error("log: {0}")]
    Log(String),
    #[error(transparent)]
    Generate(#[from] GenParamError),
    #[error(transparent)]
    World(#[from] WorldError),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[cfg(test)]
mod tests;
