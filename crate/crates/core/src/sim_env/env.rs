//! Runtime environment: step, inverse, checkpoint and restore over a world.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state_space::{canonical_json, fingerprint, ActionSpec, StateFingerprint};

use super::world::{EnvState, PageId, WorldSpec};

/// What a policy sees of the current state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub elements: Vec<String>,
    pub page: PageId,
    pub text: String,
}

impl Observation {
    pub fn of(spec: &WorldSpec, state: &EnvState) -> Self {
        let mut elements = spec.page(&state.page).map(|p| p.elements.clone()).unwrap_or_default();
        elements.sort();
        elements.dedup();
        Observation {
            elements,
            page: state.page.clone(),
            text: state.text.clone(),
        }
    }

    pub fn canonical_json(&self) -> String {
        canonical_json(self)
    }

    pub fn fingerprint(&self) -> StateFingerprint {
        fingerprint(self.canonical_json().as_bytes()).expect("canonical observation always fingerprints")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CheckpointToken(pub u64);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("action {action} is not available in state {state}")]
    IllegalAction { action: ActionSpec, state: StateFingerprint },
    #[error("step {step} cannot be inverted from the current state")]
    IrreversibleAction { step: u64 },
    #[error("checkpoint {0} is unknown or released")]
    CheckpointError(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    /// Operation index; the handle an `Inverse` action refers to.
    pub op: u64,
    pub observation: Observation,
    pub fingerprint: StateFingerprint,
    pub reversible: bool,
}

pub trait Environment: Send {
    fn reset(&mut self) -> Observation;
    fn observation(&self) -> Observation;
    fn fingerprint(&self) -> StateFingerprint;
    /// Declared forward actions of the current state, sorted.
    fn available_actions(&self) -> Vec<ActionSpec>;
    fn step(&mut self, action: &ActionSpec) -> Result<StepOutcome, EnvError>;
    fn checkpoint(&mut self) -> CheckpointToken;
    fn restore(&mut self, token: CheckpointToken) -> Result<StepOutcome, EnvError>;
    fn release(&mut self, token: CheckpointToken);
    fn goal_satisfied(&self) -> bool;
    /// Number of steps and restores since the last reset.
    fn op_count(&self) -> u64;
}

#[derive(Debug, Clone)]
struct HistoryEntry {
    pre: EnvState,
    post: EnvState,
    reversible: bool,
}

/// Deterministic simulator for a [`WorldSpec`].
#[derive(Debug, Clone)]
pub struct SimEnv {
    spec: Arc<WorldSpec>,
    index: Arc<BTreeMap<(PageId, ActionSpec), (PageId, bool)>>,
    state: EnvState,
    fp: StateFingerprint,
    ops: u64,
    history: BTreeMap<u64, HistoryEntry>,
    checkpoints: BTreeMap<u64, EnvState>,
    next_token: u64,
}

impl SimEnv {
    pub fn new(spec: Arc<WorldSpec>) -> Self {
        let index = Arc::new(spec.transition_index());
        let state = spec.initial_state();
        let fp = Observation::of(&spec, &state).fingerprint();
        SimEnv {
            spec,
            index,
            state,
            fp,
            ops: 0,
            history: BTreeMap::new(),
            checkpoints: BTreeMap::new(),
            next_token: 0,
        }
    }

    pub fn spec(&self) -> &Arc<WorldSpec> {
        &self.spec
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn live_checkpoints(&self) -> usize {
        self.checkpoints.len()
    }

    fn set_state(&mut self, state: EnvState) {
        self.fp = Observation::of(&self.spec, &state).fingerprint();
        self.state = state;
    }

    fn outcome(&self, op: u64, reversible: bool) -> StepOutcome {
        StepOutcome {
            op,
            observation: self.observation(),
            fingerprint: self.fp,
            reversible,
        }
    }
}

impl Environment for SimEnv {
    fn reset(&mut self) -> Observation {
        self.set_state(self.spec.initial_state());
        self.ops = 0;
        self.history.clear();
        self.checkpoints.clear();
        self.observation()
    }

    fn observation(&self) -> Observation {
        Observation::of(&self.spec, &self.state)
    }

    fn fingerprint(&self) -> StateFingerprint {
        self.fp
    }

    fn available_actions(&self) -> Vec<ActionSpec> {
        let mut actions = self.spec.page(&self.state.page).map(|p| p.actions.clone()).unwrap_or_default();
        actions.sort();
        actions
    }

    fn step(&mut self, action: &ActionSpec) -> Result<StepOutcome, EnvError> {
        if let Some(target) = action.inverse_of() {
            let entry = self
                .history
                .get(&target)
                .filter(|e| e.reversible && e.post == self.state)
                .ok_or(EnvError::IrreversibleAction { step: target })?;
            let pre = entry.pre.clone();
            let post = self.state.clone();
            let op = self.ops;
            self.ops += 1;
            self.set_state(pre.clone());
            // An inverse can itself be inverted.
            self.history.insert(op, HistoryEntry { pre: post, post: pre, reversible: true });
            return Ok(self.outcome(op, true));
        }
        let (next, reversible) =
            WorldSpec::successor(&self.index, &self.state, action).ok_or_else(|| EnvError::IllegalAction {
                action: action.clone(),
                state: self.fp,
            })?;
        let op = self.ops;
        self.ops += 1;
        let pre = std::mem::replace(&mut self.state, next.clone());
        self.set_state(next.clone());
        self.history.insert(op, HistoryEntry { pre, post: next, reversible });
        Ok(self.outcome(op, reversible))
    }

    fn checkpoint(&mut self) -> CheckpointToken {
        let token = self.next_token;
        self.next_token += 1;
        self.checkpoints.insert(token, self.state.clone());
        CheckpointToken(token)
    }

    fn restore(&mut self, token: CheckpointToken) -> Result<StepOutcome, EnvError> {
        let state = self.checkpoints.get(&token.0).cloned().ok_or(EnvError::CheckpointError(token.0))?;
        let op = self.ops;
        self.ops += 1;
        self.set_state(state);
        Ok(self.outcome(op, false))
    }

    fn release(&mut self, token: CheckpointToken) {
        self.checkpoints.remove(&token.0);
    }

    fn goal_satisfied(&self) -> bool {
        self.spec.is_goal(&self.state)
    }

    fn op_count(&self) -> u64 {
        self.ops
    }
}
