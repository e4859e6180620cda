//! The DFS recurrence: finish, descend into an unexplored action, or
//! backtrack to the nearest ancestor that still has one.
//!
//! Everything here is a pure function of a tree and a ledger snapshot.

use std::collections::BTreeSet;

use crate::state_space::{
    unexplored_actions, ActionSpec, FailureLedger, NodeId, SearchTree, TreeEdge, TreeError,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DfsDecision {
    Finish,
    Descend(ActionSpec),
    Backtrack {
        target: NodeId,
        /// Tree edges from the current node up to the target, child-to-root order.
        reverse_path: Vec<TreeEdge>,
    },
    /// No node on the current root path has anything left to try.
    Exhausted,
}

/// One step of the recurrence at `current`.
///
/// Descend picks the canonically first unexplored action; callers that let a
/// policy steer the search should substitute its suggestion via
/// [`choose_action`].
pub fn dfs_decide(
    tree: &SearchTree,
    ledger: &FailureLedger,
    current: &NodeId,
    done: bool,
) -> Result<DfsDecision, TreeError> {
    tree.node(current)?;
    if done {
        return Ok(DfsDecision::Finish);
    }
    let unexplored = unexplored_actions(tree, ledger, current)?;
    match unexplored.into_iter().next() {
        Some(action) => Ok(DfsDecision::Descend(action)),
        None => backtrack_decision(tree, ledger, current),
    }
}

/// Backtrack to the nearest viable ancestor, or report exhaustion.
pub fn backtrack_decision(
    tree: &SearchTree,
    ledger: &FailureLedger,
    current: &NodeId,
) -> Result<DfsDecision, TreeError> {
    match backtrack_target(tree, ledger, current)? {
        Some(target) => Ok(DfsDecision::Backtrack {
            reverse_path: reverse_path(tree, current, &target)?,
            target,
        }),
        None => Ok(DfsDecision::Exhausted),
    }
}

/// The closest strict ancestor of `current` whose unexplored set is nonempty.
pub fn backtrack_target(
    tree: &SearchTree,
    ledger: &FailureLedger,
    current: &NodeId,
) -> Result<Option<NodeId>, TreeError> {
    let mut cursor = tree.node(current)?;
    while let Some((parent, _)) = &cursor.parent {
        if !unexplored_actions(tree, ledger, parent)?.is_empty() {
            return Ok(Some(*parent));
        }
        cursor = tree.node(parent)?;
    }
    Ok(None)
}

/// Tree edges from `current` up to `target`, in upward order.
pub fn reverse_path(
    tree: &SearchTree,
    current: &NodeId,
    target: &NodeId,
) -> Result<Vec<TreeEdge>, TreeError> {
    tree.node(target)?;
    let mut edges = Vec::new();
    let mut child = *current;
    while child != *target {
        let record = tree.node(&child)?;
        let Some((parent, action)) = &record.parent else {
            return Err(TreeError::NotAnAncestor {
                node: *current,
                target: *target,
            });
        };
        edges.push(TreeEdge {
            parent: *parent,
            action: action.clone(),
            child,
        });
        child = *parent;
    }
    Ok(edges)
}

/// Policy suggestion first when it is a legal descent, else canonical order.
pub fn choose_action(unexplored: &BTreeSet<ActionSpec>, hint: Option<&ActionSpec>) -> Option<ActionSpec> {
    match hint {
        Some(h) if unexplored.contains(h) => Some(h.clone()),
        _ => unexplored.iter().next().cloned(),
    }
}
