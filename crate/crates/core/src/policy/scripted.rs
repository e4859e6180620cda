//! Noisy scripted policies. Three knobs stand in for the ways a language
//! model policy goes wrong: partial plans (`knowledge`), plausible wrong turns
//! (`wrong_branch_bias`) and late detection of dead branches
//! (`detection_depth`).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::plan::Plan;
use crate::state_space::{sha256, ActionSpec, FailureLedger, StateFingerprint, Trajectory};
use crate::status::ExecStatus;

use super::{
    first_untaken, live_states, planned_action, promote_taken, step_subtask, vague_subtask, Executor, Planner,
    PolicyError, StateView, TaskSpec, Tracker, WorldKnowledge,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedParams {
    /// Fraction of the true remaining path spelled out in each plan.
    pub knowledge: f64,
    /// Probability of taking a declared decoy when standing next to one.
    pub wrong_branch_bias: f64,
    /// Steps past a divergence before the tracker notices. `None` uses the
    /// world's own detection depth.
    pub detection_depth: Option<u32>,
    pub seed: u64,
}

impl Default for ScriptedParams {
    fn default() -> Self {
        ScriptedParams {
            knowledge: 1.0,
            wrong_branch_bias: 0.5,
            detection_depth: None,
            seed: 0,
        }
    }
}

impl ScriptedParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.knowledge) {
            return Err(format!("knowledge {} outside [0, 1]", self.knowledge));
        }
        if !(0.0..=1.0).contains(&self.wrong_branch_bias) {
            return Err(format!("wrong_branch_bias {} outside [0, 1]", self.wrong_branch_bias));
        }
        if self.detection_depth == Some(0) {
            return Err("detection_depth must be at least 1".to_string());
        }
        Ok(())
    }
}

pub struct ScriptedPlanner {
    knowledge: Arc<WorldKnowledge>,
    params: ScriptedParams,
}

impl ScriptedPlanner {
    pub fn new(knowledge: Arc<WorldKnowledge>, params: ScriptedParams) -> Self {
        ScriptedPlanner { knowledge, params }
    }
}

impl Planner for ScriptedPlanner {
    /// The true route with the world's stale step (if any) substituted, cut
    /// to the revealed fraction, followed by a free-form remainder.
    fn plan(&self, s: &StateView<'_>, task: &TaskSpec, failures: &FailureLedger) -> Result<Plan, PolicyError> {
        let route = self.knowledge.route(&s.fingerprint, failures).unwrap_or_default();
        let stale = self.knowledge.spec.revision.as_ref();
        let mut texts: Vec<String> = route
            .iter()
            .map(|(a, page)| match stale {
                Some(h) if h.page == *page && h.actual == *a => step_subtask(&h.stale, page),
                _ => step_subtask(a, page),
            })
            .collect();
        let revealed = (self.params.knowledge * texts.len() as f64).ceil() as usize;
        if revealed < texts.len() || texts.is_empty() {
            texts.truncate(revealed);
            texts.push(vague_subtask(task));
        }
        Plan::new(texts).map_err(|e| PolicyError::Contract(e.to_string()))
    }
}

pub struct ScriptedExecutor {
    knowledge: Arc<WorldKnowledge>,
    params: ScriptedParams,
}

impl ScriptedExecutor {
    pub fn new(knowledge: Arc<WorldKnowledge>, params: ScriptedParams) -> Self {
        ScriptedExecutor { knowledge, params }
    }

    /// Deterministic coin in [0, 1) keyed by seed, state and history length.
    fn coin(&self, fp: &StateFingerprint, history_len: usize) -> f64 {
        let digest = sha256(&[
            &self.params.seed.to_le_bytes(),
            fp.as_bytes(),
            &(history_len as u64).to_le_bytes(),
        ]);
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        (u64::from_le_bytes(head) >> 11) as f64 / (1u64 << 53) as f64
    }
}

impl Executor for ScriptedExecutor {
    fn act(&self, s: &StateView<'_>, _task: &TaskSpec, plan: &Plan, history: &Trajectory) -> Result<ActionSpec, PolicyError> {
        if self.params.wrong_branch_bias > 0.0 {
            let decoy = self.knowledge.spec.decoys.iter().find(|d| {
                d.page == s.observation.page && s.available.contains(&d.action) && !history.has_taken(&s.fingerprint, &d.action)
            });
            if let Some(d) = decoy {
                if self.coin(&s.fingerprint, history.len()) < self.params.wrong_branch_bias {
                    return Ok(d.action.clone());
                }
            }
        }
        match planned_action(s, plan, history) {
            Some(a) => Ok(a),
            None => first_untaken(s, history),
        }
    }
}

/// Reports DONE at the goal and FAIL on traps. A dead branch is reported
/// only once the live path has gone `detection_depth` steps past the last
/// state from which the goal was still reachable.
pub struct ScriptedTracker {
    knowledge: Arc<WorldKnowledge>,
    detection_depth: u32,
}

impl ScriptedTracker {
    pub fn new(knowledge: Arc<WorldKnowledge>, params: &ScriptedParams) -> Self {
        let detection_depth = params.detection_depth.unwrap_or_else(|| knowledge.spec.detection_depth());
        ScriptedTracker {
            knowledge,
            detection_depth: detection_depth.max(1),
        }
    }

    /// Steps taken since the live path left the viable region, if it did so
    /// after the root.
    pub fn steps_since_divergence(&self, states: &[StateFingerprint]) -> Option<usize> {
        let model = &self.knowledge.model;
        let j = states.iter().position(|fp| !model.is_viable(fp))?;
        (j >= 1).then(|| states.len() - j)
    }
}

impl Tracker for ScriptedTracker {
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
        let states = live_states(history, s.fingerprint);
        if self
            .steps_since_divergence(&states)
            .is_some_and(|n| n >= self.detection_depth as usize)
        {
            return Ok((plan.clone(), ExecStatus::Backtrack));
        }
        let mut updated = promote_taken(plan, history, &self.knowledge);
        if let Some(h) = &self.knowledge.spec.revision {
            let reached = states.iter().any(|fp| self.knowledge.page(fp) == Some(h.milestone.as_str()));
            if reached {
                let stale = step_subtask(&h.stale, &h.page);
                for t in updated.subtasks.iter_mut().filter(|t| !t.is_completed() && t.text == stale) {
                    t.text = step_subtask(&h.actual, &h.page);
                }
            }
        }
        Ok((updated, ExecStatus::Continue))
    }
}
