//! Log audit: no pruned edge is ever descended into again.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::orchestrator::LogLine;
use crate::state_space::{ActionSpec, Mode, NodeId, StateFingerprint};
use crate::status::BackStatus;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisitViolation {
    pub episode_id: String,
    pub step: u64,
    pub action: ActionSpec,
}

/// Rebuild each episode's live tree path and failure set from its log and
/// report every Normal-mode move along an edge already recorded as failed.
pub fn no_revisit_violations(lines: &[LogLine]) -> Vec<RevisitViolation> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < lines.len() {
        let id = &lines[start].episode_id;
        let end = lines[start..]
            .iter()
            .position(|l| l.episode_id != *id)
            .map_or(lines.len(), |n| start + n);
        audit_episode(&lines[start..end], &mut out);
        start = end;
    }
    out
}

fn audit_episode(lines: &[LogLine], out: &mut Vec<RevisitViolation>) {
    let Some(first) = lines.first() else {
        return;
    };
    let root = first.state_from;
    // Live path as (node, state, action taken from it to the next entry).
    let mut path: Vec<(NodeId, StateFingerprint, Option<ActionSpec>)> = vec![(NodeId::root(&root), root, None)];
    let mut failed: BTreeSet<(NodeId, ActionSpec)> = BTreeSet::new();
    let mut before_run: Option<Vec<(NodeId, StateFingerprint, Option<ActionSpec>)>> = None;
    for line in &lines[..lines.len() - 1] {
        if line.mode == Mode::Backtrack && before_run.is_none() {
            before_run = Some(path.clone());
        }
        match &line.action {
            Some(action) if !action.is_inverse() => {
                let (node, _, _) = *path.last().expect("path keeps its root");
                if line.mode == Mode::Normal && failed.contains(&(node, action.clone())) {
                    out.push(RevisitViolation {
                        episode_id: line.episode_id.clone(),
                        step: line.step,
                        action: action.clone(),
                    });
                }
                path.last_mut().expect("path keeps its root").2 = Some(action.clone());
                path.push((NodeId::child(&node, action, &line.state_to), line.state_to, None));
            }
            _ => {
                let keep = if line.state_to == root {
                    1
                } else {
                    path.iter().position(|(_, s, _)| *s == line.state_to).map_or(1, |p| p + 1)
                };
                path.truncate(keep);
                path.last_mut().expect("path keeps its root").2 = None;
            }
        }
        if line.back_status == Some(BackStatus::Recovered) {
            if let Some(abandoned) = before_run.take() {
                let (target, _, _) = *path.last().expect("path keeps its root");
                if let Some((node, _, Some(action))) = abandoned.iter().find(|(n, _, _)| *n == target) {
                    failed.insert((*node, action.clone()));
                }
            }
        }
        if line.mode == Mode::Normal {
            before_run = None;
        }
    }
}
