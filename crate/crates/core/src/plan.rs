//! Plans: ordered subtasks whose completion status only ever moves forward.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SubtaskStatus {
    Pending,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Subtask {
    pub text: String,
    pub status: SubtaskStatus,
}

impl Subtask {
    pub fn pending(text: impl Into<String>) -> Self {
        Subtask {
            text: text.into(),
            status: SubtaskStatus::Pending,
        }
    }

    pub fn is_completed(&self) -> bool {
        self.status == SubtaskStatus::Completed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// A completed subtask came back as pending.
    Reverted,
    /// A completed subtask's text was changed.
    Rewritten,
    /// A completed subtask is missing from the update.
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("subtask {0} has empty text")]
    EmptySubtask(usize),
    #[error("plan monotonicity violation at subtask {index}: {kind:?}")]
    PlanMonotonicityViolation { index: usize, kind: ViolationKind },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Plan {
    pub subtasks: Vec<Subtask>,
    pub revision: u64,
}

impl Plan {
    /// A revision-0 plan with every subtask pending.
    pub fn new<I, S>(texts: I) -> Result<Self, PlanError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let plan = Plan {
            subtasks: texts.into_iter().map(Subtask::pending).collect(),
            revision: 0,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        match self.subtasks.iter().position(|s| s.text.trim().is_empty()) {
            Some(i) => Err(PlanError::EmptySubtask(i)),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.subtasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtasks.is_empty()
    }

    pub fn completed_count(&self) -> usize {
        self.subtasks.iter().filter(|s| s.is_completed()).count()
    }

    pub fn completed_texts(&self) -> Vec<&str> {
        self.subtasks
            .iter()
            .filter(|s| s.is_completed())
            .map(|s| s.text.as_str())
            .collect()
    }

    pub fn first_pending(&self) -> Option<&Subtask> {
        self.subtasks.iter().find(|s| !s.is_completed())
    }

    pub fn complete_all(&mut self) {
        for s in &mut self.subtasks {
            s.status = SubtaskStatus::Completed;
        }
    }

    /// Check that `proposed` keeps every completed subtask of `self` in place,
    /// still completed, with unchanged text.
    pub fn check_monotone(&self, proposed: &Plan) -> Result<(), PlanError> {
        for (index, old) in self.subtasks.iter().enumerate() {
            if !old.is_completed() {
                continue;
            }
            let kind = match proposed.subtasks.get(index) {
                None => ViolationKind::Dropped,
                Some(new) if new.text != old.text => ViolationKind::Rewritten,
                Some(new) if !new.is_completed() => ViolationKind::Reverted,
                Some(_) => continue,
            };
            return Err(PlanError::PlanMonotonicityViolation { index, kind });
        }
        Ok(())
    }
}

/// Accept a tracker's proposed plan if it is monotone.
///
/// Pending subtasks may be rewritten freely. The revision advances only when
/// the subtasks actually change; on rejection the caller keeps `current`.
pub fn apply_tracker_update(current: &Plan, proposed: &Plan) -> Result<Plan, PlanError> {
    proposed.validate()?;
    current.check_monotone(proposed)?;
    if proposed.subtasks == current.subtasks {
        return Ok(current.clone());
    }
    Ok(Plan {
        subtasks: proposed.subtasks.clone(),
        revision: current.revision + 1,
    })
}

/// Fold a freshly generated plan into the current one after a replan:
/// completed subtasks are kept (in order, first), then the new plan's
/// subtasks that are not already completed.
pub fn merge_replan(current: &Plan, fresh: &Plan) -> Plan {
    let mut subtasks: Vec<Subtask> = current
        .subtasks
        .iter()
        .filter(|s| s.is_completed())
        .cloned()
        .collect();
    for s in &fresh.subtasks {
        if !subtasks.iter().any(|kept| kept.text == s.text) {
            subtasks.push(s.clone());
        }
    }
    Plan {
        subtasks,
        revision: current.revision + 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(items: &[(&str, SubtaskStatus)], revision: u64) -> Plan {
        Plan {
            subtasks: items
                .iter()
                .map(|(t, s)| Subtask {
                    text: t.to_string(),
                    status: *s,
                })
                .collect(),
            revision,
        }
    }

    use SubtaskStatus::{Completed as C, Pending as P};

    #[test]
    fn new_plan_is_all_pending() {
        let p = Plan::new(["t1", "t2"]).unwrap();
        assert_eq!(p.revision, 0);
        assert!(p.subtasks.iter().all(|s| s.status == P));
        assert_eq!(Plan::new(["ok", " "]), Err(PlanError::EmptySubtask(1)));
    }

    #[test]
    fn single_promotion_is_accepted() {
        let old = plan(&[("t1", P), ("t2", P)], 0);
        let new = apply_tracker_update(&old, &plan(&[("t1", C), ("t2", P)], 0)).unwrap();
        assert_eq!(new.revision, 1);
        assert_eq!(new.completed_texts(), vec!["t1"]);
    }

    #[test]
    fn reversion_is_rejected() {
        let old = plan(&[("t1", C), ("t2", P)], 3);
        assert_eq!(
            apply_tracker_update(&old, &plan(&[("t1", P), ("t2", P)], 3)),
            Err(PlanError::PlanMonotonicityViolation {
                index: 0,
                kind: ViolationKind::Reverted
            })
        );
        assert_eq!(
            apply_tracker_update(&old, &plan(&[("t1*", C), ("t2", P)], 3)),
            Err(PlanError::PlanMonotonicityViolation {
                index: 0,
                kind: ViolationKind::Rewritten
            })
        );
        assert_eq!(
            apply_tracker_update(&old, &plan(&[], 3)),
            Err(PlanError::PlanMonotonicityViolation {
                index: 0,
                kind: ViolationKind::Dropped
            })
        );
    }

    #[test]
    fn pending_rewrite_is_accepted() {
        let old = plan(&[("t1", C), ("t2", P)], 0);
        let new = apply_tracker_update(&old, &plan(&[("t1", C), ("t2 adjusted", P), ("t3", P)], 0))
            .unwrap();
        assert_eq!(new.revision, 1);
        assert_eq!(new.subtasks[1].text, "t2 adjusted");
    }

    #[test]
    fn unchanged_update_keeps_revision() {
        let old = plan(&[("t1", P)], 2);
        assert_eq!(apply_tracker_update(&old, &old.clone()).unwrap().revision, 2);
    }

    #[test]
    fn replan_preserves_completed() {
        let old = plan(&[("t1", C), ("t2", P), ("t3", P)], 4);
        let fresh = plan(&[("t1", P), ("t2b", P)], 0);
        let merged = merge_replan(&old, &fresh);
        assert_eq!(merged, plan(&[("t1", C), ("t2b", P)], 5));
    }
}
