//! The search tree: explored state/action graph with parent links.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::action::ActionSpec;
use super::fingerprint::{canonical_json, sha256, NodeId, StateFingerprint};
use super::ledger::FailureLedger;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("node {0:?} is not in the search tree")]
    StateNotInTree(NodeId),
    #[error("action {action} is not available at {node:?}")]
    IllegalAction { node: NodeId, action: ActionSpec },
    #[error("action {action} at {node:?} previously led to {recorded:?}, now to {observed:?}")]
    NondeterminismDetected {
        node: NodeId,
        action: Box<ActionSpec>,
        recorded: StateFingerprint,
        observed: StateFingerprint,
    },
    #[error("failure path is empty")]
    EmptyFailurePath,
    #[error("failure path edge {action} at {node:?} is not a tree edge")]
    EdgeNotInTree { node: NodeId, action: ActionSpec },
    #[error("resume node {0:?} is not a source node of the failure path")]
    ResumeNotOnPath(NodeId),
    #[error("{target:?} is not an ancestor of {node:?}")]
    NotAnAncestor { node: NodeId, target: NodeId },
}

impl NodeId {
    pub fn root(state: &StateFingerprint) -> Self {
        NodeId::from_bytes(sha256(&[b"root\0", state.as_bytes()]))
    }

    /// Identity of the node reached from `parent` via `action`, landing in `state`.
    pub fn child(parent: &NodeId, action: &ActionSpec, state: &StateFingerprint) -> Self {
        let action = canonical_json(action);
        NodeId::from_bytes(sha256(&[
            b"node\0",
            parent.as_bytes(),
            action.as_bytes(),
            b"\0",
            state.as_bytes(),
        ]))
    }
}

/// One edge of the tree, by node identity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TreeEdge {
    pub parent: NodeId,
    pub action: ActionSpec,
    pub child: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub state: StateFingerprint,
    pub depth: usize,
    pub parent: Option<(NodeId, ActionSpec)>,
    pub children: BTreeMap<ActionSpec, NodeId>,
    pub explored: BTreeSet<ActionSpec>,
    pub available: BTreeSet<ActionSpec>,
}

/// Explored portion of the state space.
///
/// Nodes are keyed by a path-qualified [`NodeId`], so a page configuration
/// reached along two different paths yields two nodes and the structure stays
/// a tree. [`SearchTree::add_transition`] is the only mutator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchTree {
    root: NodeId,
    nodes: BTreeMap<NodeId, NodeRecord>,
}

impl SearchTree {
    pub fn new(root_state: StateFingerprint, available: impl IntoIterator<Item = ActionSpec>) -> Self {
        let root = NodeId::root(&root_state);
        let record = NodeRecord {
            state: root_state,
            depth: 0,
            parent: None,
            children: BTreeMap::new(),
            explored: BTreeSet::new(),
            available: available.into_iter().filter(|a| !a.is_inverse()).collect(),
        };
        let mut nodes = BTreeMap::new();
        nodes.insert(root, record);
        SearchTree { root, nodes }
    }

    pub fn root(&self) -> &NodeId {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn get(&self, id: &NodeId) -> Option<&NodeRecord> {
        self.nodes.get(id)
    }

    pub fn node(&self, id: &NodeId) -> Result<&NodeRecord, TreeError> {
        self.nodes.get(id).ok_or(TreeError::StateNotInTree(*id))
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&NodeId, &NodeRecord)> {
        self.nodes.iter()
    }

    /// Number of explored (state, action) transitions.
    pub fn explored_edge_count(&self) -> usize {
        self.nodes.values().map(|n| n.explored.len()).sum()
    }

    /// Record that `action` taken at `from` produced `to`.
    ///
    /// A newly created child gets `available` as its action set. Recording an
    /// already explored edge with the same outcome is a no-op returning the
    /// existing child.
    pub fn add_transition(
        &mut self,
        from: &NodeId,
        action: &ActionSpec,
        to: &StateFingerprint,
        available: impl IntoIterator<Item = ActionSpec>,
    ) -> Result<NodeId, TreeError> {
        let node = self.nodes.get(from).ok_or(TreeError::StateNotInTree(*from))?;
        if !node.available.contains(action) {
            return Err(TreeError::IllegalAction {
                node: *from,
                action: action.clone(),
            });
        }
        if let Some(existing) = node.children.get(action) {
            let recorded = self.nodes[existing].state;
            if recorded != *to {
                return Err(TreeError::NondeterminismDetected {
                    node: *from,
                    action: Box::new(action.clone()),
                    recorded,
                    observed: *to,
                });
            }
            return Ok(*existing);
        }
        let depth = node.depth + 1;
        let child = NodeId::child(from, action, to);
        let record = NodeRecord {
            state: *to,
            depth,
            parent: Some((*from, action.clone())),
            children: BTreeMap::new(),
            explored: BTreeSet::new(),
            available: available.into_iter().filter(|a| !a.is_inverse()).collect(),
        };
        self.nodes.insert(child, record);
        let node = self.nodes.get_mut(from).expect("checked above");
        node.explored.insert(action.clone());
        node.children.insert(action.clone(), child);
        Ok(child)
    }

    /// Nodes from `id` up to and including the root.
    pub fn ancestors_inclusive(&self, id: &NodeId) -> Result<Vec<NodeId>, TreeError> {
        let mut out = vec![*id];
        let mut cursor = self.node(id)?;
        while let Some((parent, _)) = &cursor.parent {
            out.push(*parent);
            cursor = self.node(parent)?;
        }
        Ok(out)
    }

    /// Edges from the root down to `id`.
    pub fn root_path(&self, id: &NodeId) -> Result<Vec<TreeEdge>, TreeError> {
        let mut edges = Vec::new();
        let mut child = *id;
        let mut cursor = self.node(id)?;
        while let Some((parent, action)) = &cursor.parent {
            edges.push(TreeEdge {
                parent: *parent,
                action: action.clone(),
                child,
            });
            child = *parent;
            cursor = self.node(parent)?;
        }
        edges.reverse();
        Ok(edges)
    }

    /// `(node, action)` pairs along the root path of `id`.
    pub fn root_path_pairs(&self, id: &NodeId) -> Result<Vec<(NodeId, ActionSpec)>, TreeError> {
        Ok(self
            .root_path(id)?
            .into_iter()
            .map(|e| (e.parent, e.action))
            .collect())
    }

    /// Non-strict ancestry test.
    pub fn is_ancestor(&self, ancestor: &NodeId, node: &NodeId) -> Result<bool, TreeError> {
        self.node(ancestor)?;
        Ok(self.ancestors_inclusive(node)?.contains(ancestor))
    }

    /// Structural invariants: explored ⊆ available, children ⊆ explored,
    /// consistent parent/child links and depths.
    pub fn check_invariants(&self) -> Result<(), String> {
        if !self.nodes.contains_key(&self.root) {
            return Err("root missing".into());
        }
        for (id, node) in &self.nodes {
            if !node.explored.is_subset(&node.available) {
                return Err(format!("{id:?}: explored not within available"));
            }
            if !node.children.keys().all(|a| node.explored.contains(a)) {
                return Err(format!("{id:?}: child edge not explored"));
            }
            for (action, child) in &node.children {
                let c = self.nodes.get(child).ok_or_else(|| format!("{id:?}: dangling child"))?;
                if c.parent.as_ref() != Some(&(*id, action.clone())) || c.depth != node.depth + 1 {
                    return Err(format!("{child:?}: parent link mismatch"));
                }
            }
            match &node.parent {
                None if *id != self.root => return Err(format!("{id:?}: orphan node")),
                Some((p, a)) => {
                    let parent = self.nodes.get(p).ok_or_else(|| format!("{id:?}: missing parent"))?;
                    if parent.children.get(a) != Some(id) {
                        return Err(format!("{id:?}: parent does not list child"));
                    }
                }
                None => {}
            }
        }
        Ok(())
    }
}

/// U(s): available actions that are neither explored nor blocked by a recorded failure.
pub fn unexplored_actions(
    tree: &SearchTree,
    ledger: &FailureLedger,
    node: &NodeId,
) -> Result<BTreeSet<ActionSpec>, TreeError> {
    let record = tree.node(node)?;
    Ok(record
        .available
        .iter()
        .filter(|a| !record.explored.contains(*a) && !ledger.blocks(node, a))
        .cloned()
        .collect())
}
