//! Privileged policies that read the world model: shortest plans, no
//! wrong turns, immediate dead-branch detection.

use std::sync::Arc;

use crate::plan::Plan;
use crate::state_space::{ActionSpec, FailureLedger, Trajectory};
use crate::status::ExecStatus;

use super::{
    first_untaken, live_states, planned_action, promote_taken, step_subtask, vague_subtask, Executor, Planner,
    PolicyError, StateView, TaskSpec, Tracker, WorldKnowledge,
};

pub struct OraclePlanner {
    knowledge: Arc<WorldKnowledge>,
}

impl OraclePlanner {
    pub fn new(knowledge: Arc<WorldKnowledge>) -> Self {
        OraclePlanner { knowledge }
    }
}

impl Planner for OraclePlanner {
    /// Shortest goal path avoiding every failed edge. With no such path the
    /// plan is a single free-form subtask, so execution falls back to search.
    fn plan(&self, s: &StateView<'_>, task: &TaskSpec, failures: &FailureLedger) -> Result<Plan, PolicyError> {
        let texts: Vec<String> = match self.knowledge.route(&s.fingerprint, failures) {
            Some(route) if !route.is_empty() => route.iter().map(|(a, p)| step_subtask(a, p)).collect(),
            _ => vec![vague_subtask(task)],
        };
        Plan::new(texts).map_err(|e| PolicyError::Contract(e.to_string()))
    }
}

pub struct OracleExecutor;

impl Executor for OracleExecutor {
    fn act(&self, s: &StateView<'_>, _task: &TaskSpec, plan: &Plan, history: &Trajectory) -> Result<ActionSpec, PolicyError> {
        match planned_action(s, plan, history) {
            Some(a) => Ok(a),
            None => first_untaken(s, history),
        }
    }
}

/// Goal, trap and viability read straight from the model (detection delay 1).
/// Reports FAIL as soon as no state on the live path can reach the goal.
pub struct OracleTracker {
    knowledge: Arc<WorldKnowledge>,
}

impl OracleTracker {
    pub fn new(knowledge: Arc<WorldKnowledge>) -> Self {
        OracleTracker { knowledge }
    }
}

impl Tracker for OracleTracker {
    fn track(
        &self,
        s: &StateView<'_>,
        _task: &TaskSpec,
        plan: &Plan,
        history: &Trajectory,
        _failures: &FailureLedger,
    ) -> Result<(Plan, ExecStatus), PolicyError> {
        let model = &self.knowledge.model;
        if model.is_goal(&s.fingerprint) {
            let mut done = plan.clone();
            done.complete_all();
            return Ok((done, ExecStatus::Done));
        }
        if model.is_trap(&s.fingerprint) {
            return Ok((plan.clone(), ExecStatus::Fail));
        }
        let updated = promote_taken(plan, history, &self.knowledge);
        if model.is_viable(&s.fingerprint) {
            return Ok((updated, ExecStatus::Continue));
        }
        let states = live_states(history, s.fingerprint);
        let status = if states.iter().any(|fp| model.is_viable(fp)) {
            ExecStatus::Backtrack
        } else {
            ExecStatus::Fail
        };
        Ok((updated, status))
    }
}
