//! Historical trajectory H: every environment interaction of an episode.

use serde::{Deserialize, Serialize};

use super::action::ActionSpec;
use super::fingerprint::StateFingerprint;
use crate::status::{BackStatus, ExecStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Normal,
    Backtrack,
}

/// (s, a, s') by environment state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TransitionEdge {
    pub from: StateFingerprint,
    pub action: ActionSpec,
    pub to: StateFingerprint,
}

/// One environment interaction. `action` is `None` for a checkpoint restore.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub index: u64,
    pub mode: Mode,
    pub from: StateFingerprint,
    pub action: Option<ActionSpec>,
    pub to: StateFingerprint,
    pub exec_status: Option<ExecStatus>,
    pub back_status: Option<BackStatus>,
    pub plan_revision: u64,
}

impl TrajectoryStep {
    pub fn edge(&self) -> Option<TransitionEdge> {
        self.action.as_ref().map(|action| TransitionEdge {
            from: self.from,
            action: action.clone(),
            to: self.to,
        })
    }

    /// Forward moves: any non-inverse action, in either mode.
    pub fn is_forward(&self) -> bool {
        self.action.as_ref().is_some_and(|a| !a.is_inverse())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a step, assigning the next contiguous index.
    pub fn push(&mut self, mut step: TrajectoryStep) -> u64 {
        let index = self.steps.len() as u64;
        step.index = index;
        self.steps.push(step);
        index
    }

    pub fn steps(&self) -> &[TrajectoryStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last(&self) -> Option<&TrajectoryStep> {
        self.steps.last()
    }

    pub fn last_mut(&mut self) -> Option<&mut TrajectoryStep> {
        self.steps.last_mut()
    }

    pub fn tail(&self, n: usize) -> &[TrajectoryStep] {
        &self.steps[self.steps.len().saturating_sub(n)..]
    }

    /// The path from the episode root to the current state, derived from H
    /// alone: forward moves extend it, inverse moves and restores cut it back
    /// to the prefix ending at the state they land in.
    pub fn live_path(&self, root: &StateFingerprint) -> Vec<TransitionEdge> {
        let mut path: Vec<TransitionEdge> = Vec::new();
        for step in &self.steps {
            match step.edge() {
                Some(edge) if step.is_forward() => path.push(edge),
                _ => {
                    if step.to == *root {
                        path.clear();
                    } else if let Some(pos) = path.iter().position(|e| e.to == step.to) {
                        path.truncate(pos + 1);
                    } else {
                        path.clear();
                    }
                }
            }
        }
        path
    }

    /// Index of the most recent forward step that realized `edge`.
    pub fn last_step_for(&self, edge: &TransitionEdge) -> Option<u64> {
        self.steps
            .iter()
            .rev()
            .find(|s| s.is_forward() && s.edge().as_ref() == Some(edge))
            .map(|s| s.index)
    }

    /// Whether `action` was ever taken forward from `state`.
    pub fn has_taken(&self, state: &StateFingerprint, action: &ActionSpec) -> bool {
        self.steps
            .iter()
            .any(|s| s.is_forward() && s.from == *state && s.action.as_ref() == Some(action))
    }

    /// Indices contiguous from 0 and consecutive steps chained state to state.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (i, step) in self.steps.iter().enumerate() {
            if step.index != i as u64 {
                return Err(format!("step {i} has index {}", step.index));
            }
            if let Some(prev) = i.checked_sub(1).map(|j| &self.steps[j]) {
                if prev.to != step.from {
                    return Err(format!("step {i} does not start where step {} ended", i - 1));
                }
            }
            if step.mode == Mode::Normal && step.action.as_ref().is_none_or(ActionSpec::is_inverse) {
                return Err(format!("step {i}: normal mode step must be a forward action"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_space::fingerprint::fingerprint;

    fn fp(tag: &str) -> StateFingerprint {
        fingerprint(format!("{{\"page\":\"{tag}\"}}").as_bytes()).unwrap()
    }

    fn step(mode: Mode, from: &str, action: Option<ActionSpec>, to: &str) -> TrajectoryStep {
        TrajectoryStep {
            index: 0,
            mode,
            from: fp(from),
            action,
            to: fp(to),
            exec_status: None,
            back_status: None,
            plan_revision: 0,
        }
    }

    #[test]
    fn live_path_follows_descents_and_backtracks() {
        let mut h = Trajectory::new();
        h.push(step(Mode::Normal, "r", Some(ActionSpec::click("a")), "n1"));
        h.push(step(Mode::Normal, "n1", Some(ActionSpec::click("d")), "d1"));
        h.push(step(Mode::Normal, "d1", Some(ActionSpec::click("e")), "d2"));
        assert_eq!(h.live_path(&fp("r")).len(), 3);

        h.push(step(Mode::Backtrack, "d2", Some(ActionSpec::inverse(2)), "d1"));
        assert_eq!(h.live_path(&fp("r")).len(), 2);
        h.push(step(Mode::Backtrack, "d1", None, "n1"));
        let live = h.live_path(&fp("r"));
        assert_eq!(live.len(), 1);
        assert_eq!(live[0].to, fp("n1"));

        h.push(step(Mode::Normal, "n1", Some(ActionSpec::click("g")), "g1"));
        let live = h.live_path(&fp("r"));
        assert_eq!(live.iter().map(|e| e.to).collect::<Vec<_>>(), vec![fp("n1"), fp("g1")]);
        h.check_invariants().unwrap();

        h.push(step(Mode::Backtrack, "g1", None, "r"));
        assert!(h.live_path(&fp("r")).is_empty());
    }

    #[test]
    fn indices_are_contiguous() {
        let mut h = Trajectory::new();
        assert_eq!(h.push(step(Mode::Normal, "r", Some(ActionSpec::click("a")), "x")), 0);
        assert_eq!(h.push(step(Mode::Normal, "x", Some(ActionSpec::click("b")), "y")), 1);
        h.check_invariants().unwrap();
        let edge = h.steps()[1].edge().unwrap();
        assert_eq!(h.last_step_for(&edge), Some(1));
        assert!(h.has_taken(&fp("x"), &ActionSpec::click("b")));
    }

    #[test]
    fn broken_chain_is_reported() {
        let mut h = Trajectory::new();
        h.push(step(Mode::Normal, "r", Some(ActionSpec::click("a")), "x"));
        h.push(step(Mode::Normal, "q", Some(ActionSpec::click("b")), "y"));
        assert!(h.check_invariants().is_err());
    }
}
