//! Failure ledger: recorded dead-end paths and the edges they prune.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::action::ActionSpec;
use super::fingerprint::{NodeId, StateFingerprint};
use super::tree::{SearchTree, TreeError};

/// A pruned edge, carrying the state it leaves so planners that reason over
/// environment states (not tree nodes) can honor it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FailedEdge {
    pub node: NodeId,
    pub state: StateFingerprint,
    pub action: ActionSpec,
}

/// Append-only within an episode.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureLedger {
    failed_paths: BTreeSet<Vec<(NodeId, ActionSpec)>>,
    failed_edges: BTreeMap<(NodeId, ActionSpec), StateFingerprint>,
}

impl FailureLedger {
    /// Record a failed path.
    ///
    /// `resume` is the node the agent returned to; the edge of `path` leaving
    /// it is the first diverging edge and is the one pruned. Returns whether
    /// the path was new.
    pub fn record_failure(
        &mut self,
        tree: &SearchTree,
        path: &[(NodeId, ActionSpec)],
        resume: &NodeId,
    ) -> Result<bool, TreeError> {
        if path.is_empty() {
            return Err(TreeError::EmptyFailurePath);
        }
        for (i, (node, action)) in path.iter().enumerate() {
            let record = tree.node(node)?;
            let child = record.children.get(action).ok_or_else(|| TreeError::EdgeNotInTree {
                node: *node,
                action: action.clone(),
            })?;
            if let Some((next, next_action)) = path.get(i + 1) {
                if next != child {
                    return Err(TreeError::EdgeNotInTree {
                        node: *next,
                        action: next_action.clone(),
                    });
                }
            }
        }
        let (node, action) = path
            .iter()
            .find(|(n, _)| n == resume)
            .ok_or(TreeError::ResumeNotOnPath(*resume))?;
        let state = tree.node(node)?.state;
        self.failed_edges.insert((*node, action.clone()), state);
        Ok(self.failed_paths.insert(path.to_vec()))
    }

    pub fn blocks(&self, node: &NodeId, action: &ActionSpec) -> bool {
        self.failed_edges.contains_key(&(*node, action.clone()))
    }

    pub fn len(&self) -> usize {
        self.failed_paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.failed_paths.is_empty()
    }

    pub fn failed_paths(&self) -> impl Iterator<Item = &Vec<(NodeId, ActionSpec)>> {
        self.failed_paths.iter()
    }

    pub fn failed_edges(&self) -> impl Iterator<Item = FailedEdge> + '_ {
        self.failed_edges.iter().map(|((node, action), state)| FailedEdge {
            node: *node,
            state: *state,
            action: action.clone(),
        })
    }

    /// Pruned edges keyed by environment state rather than tree node.
    pub fn failed_state_actions(&self) -> BTreeSet<(StateFingerprint, ActionSpec)> {
        self.failed_edges
            .iter()
            .map(|((_, action), state)| (*state, action.clone()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_space::fingerprint::fingerprint;
    use crate::state_space::tree::unexplored_actions;

    fn fp(tag: &str) -> StateFingerprint {
        fingerprint(format!("{{\"page\":\"{tag}\"}}").as_bytes()).unwrap()
    }

    fn click(n: &str) -> ActionSpec {
        ActionSpec::click(n)
    }

    #[test]
    fn recorded_edge_is_excluded_from_unexplored() {
        let mut tree = SearchTree::new(fp("s0"), vec![click("a1"), click("a2")]);
        let s0 = *tree.root();
        tree.add_transition(&s0, &click("a1"), &fp("s1"), vec![]).unwrap();
        let mut ledger = FailureLedger::default();
        ledger.record_failure(&tree, &[(s0, click("a1"))], &s0).unwrap();
        let u = unexplored_actions(&tree, &ledger, &s0).unwrap();
        assert!(!u.contains(&click("a1")));
        assert!(ledger.blocks(&s0, &click("a1")));
    }

    #[test]
    fn set_semantics() {
        let mut tree = SearchTree::new(fp("s0"), vec![click("a1")]);
        let s0 = *tree.root();
        tree.add_transition(&s0, &click("a1"), &fp("s1"), vec![]).unwrap();
        let mut ledger = FailureLedger::default();
        assert!(ledger.record_failure(&tree, &[(s0, click("a1"))], &s0).unwrap());
        assert!(!ledger.record_failure(&tree, &[(s0, click("a1"))], &s0).unwrap());
        assert_eq!(ledger.len(), 1);
        assert_eq!(ledger.failed_edges().count(), 1);
    }

    #[test]
    fn empty_and_foreign_paths_rejected() {
        let tree = SearchTree::new(fp("s0"), vec![click("a1")]);
        let s0 = *tree.root();
        let mut ledger = FailureLedger::default();
        assert_eq!(ledger.record_failure(&tree, &[], &s0), Err(TreeError::EmptyFailurePath));
        assert!(matches!(
            ledger.record_failure(&tree, &[(s0, click("a1"))], &s0),
            Err(TreeError::EdgeNotInTree { .. })
        ));
    }

    #[test]
    fn shared_prefix_paths_prune_their_divergence_edges() {
        // Prefix tree: s0 -a1-> s1, then s1 branches b1, b2, b3 (b3 continues to c).
        // The surviving trajectory is s0 -a1-> s1, so each path diverges at s1.
        let mut tree = SearchTree::new(fp("s0"), vec![click("a1")]);
        let s0 = *tree.root();
        let s1 = tree
            .add_transition(&s0, &click("a1"), &fp("s1"), vec![click("b1"), click("b2"), click("b3")])
            .unwrap();
        tree.add_transition(&s1, &click("b1"), &fp("x1"), vec![]).unwrap();
        tree.add_transition(&s1, &click("b2"), &fp("x2"), vec![]).unwrap();
        let x3 = tree.add_transition(&s1, &click("b3"), &fp("x3"), vec![click("c")]).unwrap();
        tree.add_transition(&x3, &click("c"), &fp("x4"), vec![]).unwrap();

        let mut ledger = FailureLedger::default();
        let prefix = (s0, click("a1"));
        ledger.record_failure(&tree, &[prefix.clone(), (s1, click("b1"))], &s1).unwrap();
        ledger.record_failure(&tree, &[prefix.clone(), (s1, click("b2"))], &s1).unwrap();
        ledger
            .record_failure(&tree, &[prefix, (s1, click("b3")), (x3, click("c"))], &s1)
            .unwrap();

        let edges: Vec<(NodeId, ActionSpec)> =
            ledger.failed_edges().map(|e| (e.node, e.action)).collect();
        let mut expected = vec![(s1, click("b1")), (s1, click("b2")), (s1, click("b3"))];
        expected.sort();
        assert_eq!(edges, expected);
        assert!(!ledger.blocks(&s0, &click("a1")));
        assert_eq!(ledger.len(), 3);
    }
}
