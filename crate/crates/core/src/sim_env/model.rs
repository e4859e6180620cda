//! Exhaustive reachable-state model of a world, used by oracle policies,
//! generators and tests. Policies under evaluation never see it.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::state_space::{ActionSpec, StateFingerprint};

use super::env::Observation;
use super::world::{EnvState, WorldError, WorldSpec};

/// Upper bound on reachable states before model construction gives up.
pub const MAX_MODEL_STATES: usize = 100_000;

#[derive(Debug, Clone)]
pub struct StateInfo {
    pub state: EnvState,
    pub fingerprint: StateFingerprint,
    /// Sorted by action.
    pub successors: Vec<(ActionSpec, StateFingerprint, bool)>,
    pub goal: bool,
    pub trap: bool,
    /// Some goal state is reachable from here.
    pub viable: bool,
    pub goal_distance: Option<u32>,
    /// BFS depth from the initial state.
    pub depth: u32,
    pub bfs_parent: Option<(StateFingerprint, ActionSpec)>,
}

#[derive(Debug, Clone)]
pub struct WorldModel {
    initial: StateFingerprint,
    states: BTreeMap<StateFingerprint, StateInfo>,
}

impl WorldModel {
    pub fn build(spec: &WorldSpec) -> Result<Self, WorldError> {
        let index = spec.transition_index();
        let start = spec.initial_state();
        let initial = Observation::of(spec, &start).fingerprint();
        let mut states: BTreeMap<StateFingerprint, StateInfo> = BTreeMap::new();
        let mut queue = VecDeque::new();
        states.insert(initial, info(spec, start.clone(), initial, 0, None));
        queue.push_back(start);

        while let Some(state) = queue.pop_front() {
            let fp = Observation::of(spec, &state).fingerprint();
            let depth = states[&fp].depth;
            let mut actions: Vec<&ActionSpec> = spec.page(&state.page).map(|p| p.actions.iter().collect()).unwrap_or_default();
            actions.sort();
            let mut successors = Vec::with_capacity(actions.len());
            for action in actions {
                let Some((next, reversible)) = WorldSpec::successor(&index, &state, action) else {
                    continue;
                };
                let next_fp = Observation::of(spec, &next).fingerprint();
                successors.push((action.clone(), next_fp, reversible));
                if !states.contains_key(&next_fp) {
                    if states.len() >= MAX_MODEL_STATES {
                        return Err(WorldError::TooManyStates(MAX_MODEL_STATES));
                    }
                    states.insert(next_fp, info(spec, next.clone(), next_fp, depth + 1, Some((fp, action.clone()))));
                    queue.push_back(next);
                }
            }
            states.get_mut(&fp).expect("state inserted before expansion").successors = successors;
        }

        // Reverse BFS from goal states gives goal distances.
        let mut preds: BTreeMap<StateFingerprint, Vec<StateFingerprint>> = BTreeMap::new();
        for (fp, s) in &states {
            for (_, to, _) in &s.successors {
                preds.entry(*to).or_default().push(*fp);
            }
        }
        let mut queue: VecDeque<StateFingerprint> = VecDeque::new();
        for (fp, s) in states.iter_mut() {
            if s.goal {
                s.goal_distance = Some(0);
                queue.push_back(*fp);
            }
        }
        while let Some(fp) = queue.pop_front() {
            let d = states[&fp].goal_distance.expect("queued states have a distance");
            for p in preds.get(&fp).into_iter().flatten() {
                let s = states.get_mut(p).expect("predecessor is a known state");
                if s.goal_distance.is_none() {
                    s.goal_distance = Some(d + 1);
                    queue.push_back(*p);
                }
            }
        }
        for s in states.values_mut() {
            s.viable = s.goal_distance.is_some();
        }
        Ok(WorldModel { initial, states })
    }

    pub fn initial(&self) -> StateFingerprint {
        self.initial
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, fp: &StateFingerprint) -> Option<&StateInfo> {
        self.states.get(fp)
    }

    pub fn states(&self) -> impl Iterator<Item = &StateInfo> {
        self.states.values()
    }

    pub fn goal_reachable(&self) -> bool {
        self.states[&self.initial].viable
    }

    pub fn is_viable(&self, fp: &StateFingerprint) -> bool {
        self.states.get(fp).is_some_and(|s| s.viable)
    }

    pub fn is_goal(&self, fp: &StateFingerprint) -> bool {
        self.states.get(fp).is_some_and(|s| s.goal)
    }

    pub fn is_trap(&self, fp: &StateFingerprint) -> bool {
        self.states.get(fp).is_some_and(|s| s.trap)
    }

    pub fn successor(&self, fp: &StateFingerprint, action: &ActionSpec) -> Option<StateFingerprint> {
        self.states
            .get(fp)?
            .successors
            .iter()
            .find(|(a, _, _)| a == action)
            .map(|(_, to, _)| *to)
    }

    /// Shortest action sequence from `from` to a goal state, skipping the
    /// listed state/action pairs. Ties break by action order.
    pub fn shortest_goal_path(
        &self,
        from: &StateFingerprint,
        avoid: &BTreeSet<(StateFingerprint, ActionSpec)>,
    ) -> Option<Vec<(StateFingerprint, ActionSpec)>> {
        let mut parent: BTreeMap<StateFingerprint, Option<(StateFingerprint, ActionSpec)>> = BTreeMap::new();
        let mut queue = VecDeque::new();
        parent.insert(*from, None);
        queue.push_back(*from);
        while let Some(fp) = queue.pop_front() {
            let info = self.states.get(&fp)?;
            if info.goal {
                let mut path = Vec::new();
                let mut cur = fp;
                while let Some(Some((p, a))) = parent.get(&cur) {
                    path.push((*p, a.clone()));
                    cur = *p;
                }
                path.reverse();
                return Some(path);
            }
            for (action, to, _) in &info.successors {
                if avoid.contains(&(fp, action.clone())) || parent.contains_key(to) {
                    continue;
                }
                parent.insert(*to, Some((fp, action.clone())));
                queue.push_back(*to);
            }
        }
        None
    }

    /// All minimal-length goal paths from the initial state, or `None` when
    /// there are more than `limit`.
    pub fn all_minimal_goal_paths(&self, limit: usize) -> Option<Vec<Vec<ActionSpec>>> {
        let mut out = Vec::new();
        if self.states[&self.initial].goal_distance.is_none() {
            return Some(out);
        }
        let mut prefix = Vec::new();
        if self.collect_minimal(&self.initial, &mut prefix, &mut out, limit) {
            Some(out)
        } else {
            None
        }
    }

    fn collect_minimal(
        &self,
        fp: &StateFingerprint,
        prefix: &mut Vec<ActionSpec>,
        out: &mut Vec<Vec<ActionSpec>>,
        limit: usize,
    ) -> bool {
        let info = &self.states[fp];
        let d = info.goal_distance.expect("only viable states are visited");
        if d == 0 {
            if out.len() >= limit {
                return false;
            }
            out.push(prefix.clone());
            return true;
        }
        for (action, to, _) in &info.successors {
            if self.states[to].goal_distance == Some(d - 1) {
                prefix.push(action.clone());
                let ok = self.collect_minimal(to, prefix, out, limit);
                prefix.pop();
                if !ok {
                    return false;
                }
            }
        }
        true
    }
}

fn info(
    spec: &WorldSpec,
    state: EnvState,
    fingerprint: StateFingerprint,
    depth: u32,
    bfs_parent: Option<(StateFingerprint, ActionSpec)>,
) -> StateInfo {
    StateInfo {
        goal: spec.is_goal(&state),
        trap: spec.is_trap(&state.page),
        state,
        fingerprint,
        successors: Vec::new(),
        viable: false,
        goal_distance: None,
        depth,
        bfs_parent,
    }
}
