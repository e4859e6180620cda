//! Policies with no world knowledge beyond the goal check. With these the
//! orchestrator performs an exhaustive depth-first search.

use std::sync::Arc;

use crate::plan::Plan;
use crate::sim_env::WorldSpec;
use crate::state_space::{ActionSpec, FailureLedger, Trajectory};
use crate::status::ExecStatus;

use super::{first_untaken, vague_subtask, Executor, Planner, PolicyError, StateView, TaskSpec, Tracker};

pub struct BlindPlanner;

impl Planner for BlindPlanner {
    fn plan(&self, _s: &StateView<'_>, task: &TaskSpec, _failures: &FailureLedger) -> Result<Plan, PolicyError> {
        Plan::new([vague_subtask(task)]).map_err(|e| PolicyError::Contract(e.to_string()))
    }
}

pub struct BlindExecutor;

impl Executor for BlindExecutor {
    fn act(&self, s: &StateView<'_>, _task: &TaskSpec, _plan: &Plan, history: &Trajectory) -> Result<ActionSpec, PolicyError> {
        first_untaken(s, history)
    }
}

/// DONE exactly when the goal predicate holds, CONTINUE otherwise.
pub struct GoalOnlyTracker {
    spec: Arc<WorldSpec>,
}

impl GoalOnlyTracker {
    pub fn new(spec: Arc<WorldSpec>) -> Self {
        GoalOnlyTracker { spec }
    }
}

impl Tracker for GoalOnlyTracker {
    fn track(
        &self,
        s: &StateView<'_>,
        _task: &TaskSpec,
        plan: &Plan,
        _history: &Trajectory,
        _failures: &FailureLedger,
    ) -> Result<(Plan, ExecStatus), PolicyError> {
        let at_goal = self.spec.goal.pages.contains(&s.observation.page)
            && self
                .spec
                .goal
                .required_text
                .as_ref()
                .is_none_or(|t| *t == s.observation.text);
        if at_goal {
            let mut done = plan.clone();
            done.complete_all();
            Ok((done, ExecStatus::Done))
        } else {
            Ok((plan.clone(), ExecStatus::Continue))
        }
    }
}
