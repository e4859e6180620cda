//! Planner, executor and tracker contracts with reference implementations.
//!
//! * [`oracle`]: privileged policies that read the world model directly.
//! * [`scripted`]: noisy policies with tunable plan knowledge, wrong-branch
//!   bias and delayed dead-branch detection.
//! * [`blind`]: no world knowledge beyond the goal check; plain DFS.
//! * [`remote`]: JSON over HTTP to an external policy server.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plan::Plan;
use crate::sim_env::{Observation, WorldError, WorldModel, WorldSpec};
use crate::state_space::{ActionSpec, FailureLedger, StateFingerprint, Trajectory};
use crate::status::{BackStatus, ExecStatus};

pub mod blind;
pub mod oracle;
pub mod remote;
pub mod scripted;

pub use blind::{BlindExecutor, BlindPlanner, GoalOnlyTracker};
pub use oracle::{OracleExecutor, OraclePlanner, OracleTracker};
pub use remote::{RemoteConfig, RemotePolicy};
pub use scripted::{ScriptedExecutor, ScriptedParams, ScriptedPlanner, ScriptedTracker};

/// The task X as handed to every policy call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub description: String,
}

/// The current state s as seen by a policy.
#[derive(Debug, Clone, Copy)]
pub struct StateView<'a> {
    pub fingerprint: StateFingerprint,
    pub observation: &'a Observation,
    /// Forward actions declared in this state, sorted.
    pub available: &'a [ActionSpec],
}

/// What the executor asks for while climbing back to a target state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BacktrackAct {
    Inverse(ActionSpec),
    Restore,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("{role} call timed out after {after_ms} ms")]
    PolicyTimeout { role: String, after_ms: u64 },
    #[error("policy endpoint returned HTTP {status}: {body}")]
    PolicyEndpointError { status: u16, body: String },
    #[error("malformed policy response at byte {offset}: {message}")]
    PolicyProtocolError { offset: usize, message: String },
    #[error("policy transport: {0}")]
    Transport(String),
    #[error("policy contract: {0}")]
    Contract(String),
}

pub trait Planner: Send + Sync {
    fn plan(&self, s: &StateView<'_>, task: &TaskSpec, failures: &FailureLedger) -> Result<Plan, PolicyError>;
}

pub trait Executor: Send + Sync {
    fn act(&self, s: &StateView<'_>, task: &TaskSpec, plan: &Plan, history: &Trajectory)
        -> Result<ActionSpec, PolicyError>;

    /// One move toward `target` from the state where `history` ends.
    fn backtrack_act(&self, history: &Trajectory, _target: &StateFingerprint) -> Result<BacktrackAct, PolicyError> {
        Ok(invert_last_edge(history))
    }
}

pub trait Tracker: Send + Sync {
    fn track(
        &self,
        s: &StateView<'_>,
        task: &TaskSpec,
        plan: &Plan,
        history: &Trajectory,
        failures: &FailureLedger,
    ) -> Result<(Plan, ExecStatus), PolicyError>;

    fn verify_backtrack(
        &self,
        s: &StateView<'_>,
        target: &StateFingerprint,
        _history: &Trajectory,
    ) -> Result<BackStatus, PolicyError> {
        Ok(if s.fingerprint == *target {
            BackStatus::Recovered
        } else {
            BackStatus::NotRecovered
        })
    }
}

/// The three roles for one episode.
pub struct PolicySet {
    pub planner: Box<dyn Planner>,
    pub executor: Box<dyn Executor>,
    pub tracker: Box<dyn Tracker>,
}

/// Undo the last edge of the live path by referencing the history step that
/// took it; ask for a checkpoint restore when there is nothing to invert.
pub fn invert_last_edge(history: &Trajectory) -> BacktrackAct {
    let Some(first) = history.steps().first() else {
        return BacktrackAct::Restore;
    };
    let path = history.live_path(&first.from);
    let Some(edge) = path.last() else {
        return BacktrackAct::Restore;
    };
    match history.last_step_for(edge) {
        Some(index) => BacktrackAct::Inverse(ActionSpec::inverse(index)),
        None => BacktrackAct::Restore,
    }
}

/// States on the live path from the episode root to `current`, inclusive.
pub fn live_states(history: &Trajectory, current: StateFingerprint) -> Vec<StateFingerprint> {
    let Some(first) = history.steps().first() else {
        return vec![current];
    };
    let root = first.from;
    let mut states = vec![root];
    states.extend(history.live_path(&root).iter().map(|e| e.to));
    if states.last() != Some(&current) {
        // History does not end here (should not happen); fall back to the
        // current state alone.
        return vec![current];
    }
    states
}

/// Subtask text that names a concrete step: `"<action> @ <page>"`.
pub fn step_subtask(action: &ActionSpec, page: &str) -> String {
    format!("{action} @ {page}")
}

/// Inverse of [`step_subtask`]; `None` for free-form subtasks.
pub fn parse_step_subtask(text: &str) -> Option<(ActionSpec, String)> {
    let (action, page) = text.rsplit_once(" @ ")?;
    let action = action.parse().ok()?;
    Some((action, page.to_string()))
}

/// Catch-all subtask covering the part of the task the planner cannot spell out.
pub fn vague_subtask(task: &TaskSpec) -> String {
    format!("finish: {}", task.description)
}

/// Privileged view of a world, shared by the oracle and scripted policies.
#[derive(Debug)]
pub struct WorldKnowledge {
    pub spec: Arc<WorldSpec>,
    pub model: WorldModel,
}

impl WorldKnowledge {
    pub fn new(spec: Arc<WorldSpec>) -> Result<Arc<Self>, WorldError> {
        let model = WorldModel::build(&spec)?;
        Ok(Arc::new(WorldKnowledge { spec, model }))
    }

    pub fn page(&self, fp: &StateFingerprint) -> Option<&str> {
        self.model.state(fp).map(|s| s.state.page.as_str())
    }

    /// Shortest goal path from `from` avoiding the ledger's failed edges, as
    /// step subtasks.
    pub fn route(&self, from: &StateFingerprint, failures: &FailureLedger) -> Option<Vec<(ActionSpec, String)>> {
        let avoid = failures.failed_state_actions();
        let path = self.model.shortest_goal_path(from, &avoid)?;
        Some(
            path.into_iter()
                .map(|(fp, a)| (a, self.page(&fp).unwrap_or_default().to_string()))
                .collect(),
        )
    }
}

/// First pending step subtask for the current page whose action is available
/// and not yet taken from this state.
pub(crate) fn planned_action(s: &StateView<'_>, plan: &Plan, history: &Trajectory) -> Option<ActionSpec> {
    plan.subtasks
        .iter()
        .filter(|t| !t.is_completed())
        .filter_map(|t| parse_step_subtask(&t.text))
        .find(|(a, page)| {
            *page == s.observation.page && s.available.contains(a) && !history.has_taken(&s.fingerprint, a)
        })
        .map(|(a, _)| a)
}

/// First available action not yet taken from this state, else the first
/// available action.
pub(crate) fn first_untaken(s: &StateView<'_>, history: &Trajectory) -> Result<ActionSpec, PolicyError> {
    s.available
        .iter()
        .find(|a| !history.has_taken(&s.fingerprint, a))
        .or_else(|| s.available.first())
        .cloned()
        .ok_or_else(|| PolicyError::Contract("no action is available in this state".to_string()))
}

/// Mark pending step subtasks completed when their edge lies on the live path.
pub(crate) fn promote_taken(plan: &Plan, history: &Trajectory, knowledge: &WorldKnowledge) -> Plan {
    let taken: Vec<(String, ActionSpec)> = match history.steps().first() {
        Some(first) => history
            .live_path(&first.from)
            .into_iter()
            .map(|e| (knowledge.page(&e.from).unwrap_or_default().to_string(), e.action))
            .collect(),
        None => Vec::new(),
    };
    let mut out = plan.clone();
    for t in out.subtasks.iter_mut().filter(|t| !t.is_completed()) {
        if let Some((action, page)) = parse_step_subtask(&t.text) {
            if taken.iter().any(|(p, a)| *p == page && *a == action) {
                t.status = crate::plan::SubtaskStatus::Completed;
            }
        }
    }
    out
}
