//! States, actions, the search tree, the failure ledger and trajectories.

mod action;
mod fingerprint;
mod ledger;
mod trajectory;
mod tree;

pub use action::{ActionError, ActionKind, ActionSpec};
pub use fingerprint::{
    canonical_json, fingerprint, FingerprintError, NodeId, StateFingerprint, EMPTY_OBSERVATION_DIGEST,
};
pub(crate) use fingerprint::sha256;
pub use ledger::{FailedEdge, FailureLedger};
pub use trajectory::{Mode, Trajectory, TrajectoryStep, TransitionEdge};
pub use tree::{unexplored_actions, NodeRecord, SearchTree, TreeEdge, TreeError};
