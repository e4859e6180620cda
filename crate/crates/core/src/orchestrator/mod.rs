//! Episode runner: the plan / act / track loop with multi-level backtracking.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plan::Plan;
use crate::sim_env::CheckpointToken;
use crate::state_space::{NodeId, StateFingerprint, Trajectory};
use crate::status::ExecStatus;

mod episode;
mod log;

pub use episode::run_episode;
pub use log::{log_lines, parse_log, write_jsonl, LogLine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationFlags {
    pub enable_backtrack: bool,
    pub enable_tracker: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        AblationFlags {
            enable_backtrack: true,
            enable_tracker: true,
        }
    }
}

/// How far a backtrack may climb.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BacktrackScope {
    /// To the nearest ancestor with an untried action.
    #[default]
    MultiLevel,
    /// Only to the parent, and only if the parent has an untried action.
    SingleStep,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub max_steps: u32,
    pub max_backtrack_retries: u32,
    pub snapshot_window: usize,
    pub ablation: AblationFlags,
    pub seed: u64,
    pub backtrack_scope: BacktrackScope,
    /// Last-resort recovery: restore the initial state and replay the path
    /// to the target.
    pub reset_replay: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            max_steps: 50,
            max_backtrack_retries: 3,
            snapshot_window: 10,
            ablation: AblationFlags::default(),
            seed: 0,
            backtrack_scope: BacktrackScope::MultiLevel,
            reset_replay: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("max_steps must be at least 1")]
    ZeroSteps,
    #[error("snapshot_window must be at least 1")]
    ZeroWindow,
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_steps == 0 {
            return Err(ConfigError::ZeroSteps);
        }
        if self.snapshot_window == 0 {
            return Err(ConfigError::ZeroWindow);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Done,
    Fail,
    BudgetExhausted,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Done => "DONE",
            Outcome::Fail => "FAIL",
            Outcome::BudgetExhausted => "BUDGET_EXHAUSTED",
        })
    }
}

/// What the loop does next after a Normal-mode status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Directive {
    NextExecutorStep,
    EnterBacktrack,
    TerminateSuccess,
    TerminateFail,
}

pub fn dispatch_status(status: ExecStatus, ablation: &AblationFlags) -> Directive {
    match status {
        ExecStatus::Continue => Directive::NextExecutorStep,
        ExecStatus::Backtrack if ablation.enable_backtrack => Directive::EnterBacktrack,
        ExecStatus::Backtrack => Directive::TerminateFail,
        ExecStatus::Done => Directive::TerminateSuccess,
        ExecStatus::Fail => Directive::TerminateFail,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub state: StateFingerprint,
    pub node: NodeId,
    pub token: CheckpointToken,
    pub step_index: u64,
}

/// Sliding window of environment checkpoints, oldest evicted first.
#[derive(Debug, Clone)]
pub struct SnapshotStack {
    entries: VecDeque<Snapshot>,
    capacity: usize,
}

impl SnapshotStack {
    pub fn new(capacity: usize) -> Self {
        SnapshotStack {
            entries: VecDeque::new(),
            capacity: capacity.max(1),
        }
    }

    /// Push and return whatever fell out of the window.
    pub fn push(&mut self, snapshot: Snapshot) -> Option<Snapshot> {
        debug_assert!(self.entries.back().is_none_or(|b| b.step_index < snapshot.step_index));
        self.entries.push_back(snapshot);
        if self.entries.len() > self.capacity {
            self.entries.pop_front()
        } else {
            None
        }
    }

    /// Most recent checkpoint taken at `node`.
    pub fn find(&self, node: &NodeId) -> Option<&Snapshot> {
        self.entries.iter().rev().find(|s| s.node == *node)
    }

    /// Keep entries matching `keep`; return the dropped ones.
    pub fn retain(&mut self, mut keep: impl FnMut(&Snapshot) -> bool) -> Vec<Snapshot> {
        let mut dropped = Vec::new();
        self.entries.retain(|s| {
            let k = keep(s);
            if !k {
                dropped.push(s.clone());
            }
            k
        });
        dropped
    }

    pub fn entries(&self) -> impl Iterator<Item = &Snapshot> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Notable things that happened during an episode but are not env steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EpisodeEvent {
    BacktrackStarted { at_step: u64, target: StateFingerprint, forced: bool },
    InverseRejected { at_step: u64, message: String },
    CheckpointRestored { at_step: u64, state: StateFingerprint },
    PrefixReplayed { at_step: u64, edges: usize },
    BacktrackFinished { at_step: u64, recovered: bool },
    FailureRecorded { at_step: u64, state: StateFingerprint, newly: bool },
    Replanned { at_step: u64, revision: u64 },
    PlanUpdateRejected { at_step: u64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode_id: String,
    pub outcome: Outcome,
    pub steps_used: u32,
    pub backtrack_attempts: u32,
    pub backtrack_successes: u32,
    pub backtrack_steps_total: u32,
    pub trajectory: Trajectory,
    pub final_plan: Plan,
    pub final_state: StateFingerprint,
    /// Mode in force when the episode ended.
    pub final_mode: crate::state_space::Mode,
    pub events: Vec<EpisodeEvent>,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EpisodeError {
    #[error("{role} policy failed: {source}")]
    EpisodePolicyError {
        role: &'static str,
        source: crate::policy::PolicyError,
    },
    #[error("environment: {0}")]
    Env(#[from] crate::sim_env::EnvError),
    #[error("search tree: {0}")]
    Tree(#[from] crate::state_space::TreeError),
    #[error("cannot return to the backtrack target: no usable inverse, checkpoint or replay")]
    BacktrackIrrecoverable,
    #[error("replay reached {got} where {expected} was expected")]
    ReplayMismatch {
        expected: StateFingerprint,
        got: StateFingerprint,
    },
}
