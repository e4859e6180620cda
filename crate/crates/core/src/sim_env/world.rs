//! World definitions: pages, declared actions, transitions, goal and traps.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state_space::{canonical_json, sha256, ActionSpec};

pub type PageId = String;

/// Scenario family. Each family forces a known outcome under scripted policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScenarioClass {
    /// Solvable with no wrong branch reachable before the goal.
    A,
    /// One decoy branch whose wrongness shows only several steps in.
    B,
    /// Needs a plan revision at a milestone.
    C,
    /// Goal unreachable.
    U,
}

impl ScenarioClass {
    pub const ALL: [ScenarioClass; 4] = [ScenarioClass::A, ScenarioClass::B, ScenarioClass::C, ScenarioClass::U];

    pub fn label(self) -> &'static str {
        match self {
            ScenarioClass::A => "A",
            ScenarioClass::B => "B",
            ScenarioClass::C => "C",
            ScenarioClass::U => "U",
        }
    }
}

impl fmt::Display for ScenarioClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ScenarioClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(ScenarioClass::A),
            "B" => Ok(ScenarioClass::B),
            "C" => Ok(ScenarioClass::C),
            "U" => Ok(ScenarioClass::U),
            other => Err(format!("unknown scenario class {other:?} (expected A, B, C or U)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub depth: u32,
    pub branching: u32,
    pub n_traps: u32,
    pub irreversible_fraction: f64,
    pub detection_depth: u32,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            depth: 4,
            branching: 2,
            n_traps: 1,
            irreversible_fraction: 0.3,
            detection_depth: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub id: PageId,
    pub elements: Vec<String>,
    pub actions: Vec<ActionSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: PageId,
    pub action: ActionSpec,
    pub to: PageId,
    /// Whether an inverse action can undo this edge.
    pub reversible: bool,
}

/// The goal holds on any listed page once the typed text equals `required_text`
/// (when set).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub pages: Vec<PageId>,
    pub required_text: Option<String>,
}

/// A plausible-looking wrong branch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoyEdge {
    pub page: PageId,
    pub action: ActionSpec,
}

/// The believed solution step `stale` at `page` is wrong; `actual` is right.
/// The discrepancy becomes visible once `milestone` has been reached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRevisionHint {
    pub milestone: PageId,
    pub page: PageId,
    pub stale: ActionSpec,
    pub actual: ActionSpec,
}

/// Environment state: current page plus accumulated side effects.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EnvState {
    pub page: PageId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub category: ScenarioClass,
    #[serde(default)]
    pub params: Option<GenParams>,
    pub task: String,
    pub initial: PageId,
    pub pages: Vec<Page>,
    pub transitions: Vec<Transition>,
    pub goal: GoalSpec,
    #[serde(default)]
    pub traps: Vec<PageId>,
    #[serde(default)]
    pub solution_paths: Vec<Vec<ActionSpec>>,
    #[serde(default)]
    pub decoys: Vec<DecoyEdge>,
    #[serde(default)]
    pub revision: Option<PlanRevisionHint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("duplicate page {0}")]
    DuplicatePage(PageId),
    #[error("unknown page {0}")]
    UnknownPage(PageId),
    #[error("page {page} declares {action} without a transition")]
    MissingTransition { page: PageId, action: ActionSpec },
    #[error("transition {action} from {page} is not declared on the page or is duplicated")]
    UndeclaredTransition { page: PageId, action: ActionSpec },
    #[error("page {page} declares the inverse action {action}")]
    InverseDeclared { page: PageId, action: ActionSpec },
    #[error("page {0} is both a trap and a goal")]
    TrapIsGoal(PageId),
    #[error("solution path {index}: {reason}")]
    InconsistentSolution { index: usize, reason: String },
    #[error("decoy {action} at {page} is not a transition")]
    BadDecoy { page: PageId, action: ActionSpec },
    #[error("revision hint: {0}")]
    BadRevision(String),
    #[error("world has more than {0} reachable states")]
    TooManyStates(usize),
    #[error("world file: {0}")]
    Parse(String),
}

impl WorldSpec {
    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let spec: WorldSpec = serde_json::from_str(text).map_err(|e| WorldError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Key-sorted compact JSON; the content address of the world.
    pub fn to_canonical_json(&self) -> String {
        canonical_json(self)
    }

    /// Lowercase hex SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        hex::encode(sha256(&[self.to_canonical_json().as_bytes()]))
    }

    pub fn page(&self, id: &str) -> Option<&Page> {
        self.pages.iter().find(|p| p.id == id)
    }

    pub fn detection_depth(&self) -> u32 {
        self.params.as_ref().map_or(1, |p| p.detection_depth.max(1))
    }

    pub fn transition_index(&self) -> BTreeMap<(PageId, ActionSpec), (PageId, bool)> {
        self.transitions
            .iter()
            .map(|t| ((t.from.clone(), t.action.clone()), (t.to.clone(), t.reversible)))
            .collect()
    }

    pub fn initial_state(&self) -> EnvState {
        EnvState {
            page: self.initial.clone(),
            text: String::new(),
        }
    }

    pub fn is_goal(&self, state: &EnvState) -> bool {
        self.goal.pages.contains(&state.page)
            && self
                .goal
                .required_text
                .as_ref()
                .is_none_or(|t| *t == state.text)
    }

    pub fn is_trap(&self, page: &str) -> bool {
        self.traps.iter().any(|t| t == page)
    }

    pub fn is_decoy(&self, page: &str, action: &ActionSpec) -> bool {
        self.decoys.iter().any(|d| d.page == page && d.action == *action)
    }

    /// Apply a forward action to a state. `None` if the action is not declared.
    pub fn successor(
        index: &BTreeMap<(PageId, ActionSpec), (PageId, bool)>,
        state: &EnvState,
        action: &ActionSpec,
    ) -> Option<(EnvState, bool)> {
        let (to, reversible) = index.get(&(state.page.clone(), action.clone()))?;
        let mut text = state.text.clone();
        if let Some(payload) = action.payload() {
            text.push_str(payload);
        }
        Some((EnvState { page: to.clone(), text }, *reversible))
    }

    /// Build a world from an edge list. Pages, elements and solution paths
    /// are derived; the result is validated.
    pub fn from_edges(
        category: ScenarioClass,
        task: impl Into<String>,
        initial: &str,
        edges: &[(&str, ActionSpec, &str, bool)],
        goal: GoalSpec,
        traps: &[&str],
    ) -> Result<Self, WorldError> {
        let mut pages: BTreeMap<String, Page> = BTreeMap::new();
        let mut touch = |id: &str| {
            pages.entry(id.to_string()).or_insert_with(|| Page {
                id: id.to_string(),
                elements: Vec::new(),
                actions: Vec::new(),
            });
        };
        touch(initial);
        for p in goal.pages.iter().map(String::as_str).chain(traps.iter().copied()) {
            touch(p);
        }
        for (from, _, to, _) in edges {
            touch(from);
            touch(to);
        }
        for (from, action, _, _) in edges {
            let page = pages.get_mut(*from).expect("page registered above");
            if let Some(t) = action.target() {
                page.elements.push(t.to_string());
            }
            page.actions.push(action.clone());
        }
        for page in pages.values_mut() {
            page.elements.sort();
            page.elements.dedup();
        }
        let mut spec = WorldSpec {
            category,
            params: None,
            task: task.into(),
            initial: initial.to_string(),
            pages: pages.into_values().collect(),
            transitions: edges
                .iter()
                .map(|(from, action, to, reversible)| Transition {
                    from: from.to_string(),
                    action: action.clone(),
                    to: to.to_string(),
                    reversible: *reversible,
                })
                .collect(),
            goal,
            traps: traps.iter().map(|t| t.to_string()).collect(),
            solution_paths: Vec::new(),
            decoys: Vec::new(),
            revision: None,
        };
        let model = super::model::WorldModel::build(&spec)?;
        spec.solution_paths = model.all_minimal_goal_paths(10_000).unwrap_or_default();
        spec.validate()?;
        Ok(spec)
    }

    /// Structural checks, then solution paths against an independently
    /// enumerated set of minimal goal paths.
    pub fn validate(&self) -> Result<(), WorldError> {
        let mut ids = BTreeSet::new();
        for page in &self.pages {
            if !ids.insert(page.id.as_str()) {
                return Err(WorldError::DuplicatePage(page.id.clone()));
            }
        }
        let known = |id: &PageId| -> Result<(), WorldError> {
            if ids.contains(id.as_str()) {
                Ok(())
            } else {
                Err(WorldError::UnknownPage(id.clone()))
            }
        };
        known(&self.initial)?;
        for p in self.goal.pages.iter().chain(&self.traps) {
            known(p)?;
        }
        if let Some(t) = self.traps.iter().find(|t| self.goal.pages.contains(t)) {
            return Err(WorldError::TrapIsGoal(t.clone()));
        }

        let mut declared: BTreeSet<(&str, &ActionSpec)> = BTreeSet::new();
        for page in &self.pages {
            for action in &page.actions {
                if action.is_inverse() {
                    return Err(WorldError::InverseDeclared {
                        page: page.id.clone(),
                        action: action.clone(),
                    });
                }
                declared.insert((page.id.as_str(), action));
            }
        }
        let mut seen = BTreeSet::new();
        for t in &self.transitions {
            known(&t.from)?;
            known(&t.to)?;
            if !declared.contains(&(t.from.as_str(), &t.action)) || !seen.insert((t.from.as_str(), &t.action)) {
                return Err(WorldError::UndeclaredTransition {
                    page: t.from.clone(),
                    action: t.action.clone(),
                });
            }
        }
        if let Some((page, action)) = declared.iter().find(|d| !seen.contains(*d)) {
            return Err(WorldError::MissingTransition {
                page: page.to_string(),
                action: (*action).clone(),
            });
        }
        for d in &self.decoys {
            if !seen.contains(&(d.page.as_str(), &d.action)) {
                return Err(WorldError::BadDecoy {
                    page: d.page.clone(),
                    action: d.action.clone(),
                });
            }
        }
        if let Some(h) = &self.revision {
            known(&h.milestone)?;
            for a in [&h.stale, &h.actual] {
                if !seen.contains(&(h.page.as_str(), a)) {
                    return Err(WorldError::BadRevision(format!("{a} is not declared at {}", h.page)));
                }
            }
        }
        self.check_solutions()
    }

    fn check_solutions(&self) -> Result<(), WorldError> {
        let index = self.transition_index();
        for (i, path) in self.solution_paths.iter().enumerate() {
            let mut state = self.initial_state();
            for action in path {
                state = Self::successor(&index, &state, action)
                    .ok_or_else(|| WorldError::InconsistentSolution {
                        index: i,
                        reason: format!("{action} not available at {}", state.page),
                    })?
                    .0;
            }
            if !self.is_goal(&state) {
                return Err(WorldError::InconsistentSolution {
                    index: i,
                    reason: format!("ends at {} which does not satisfy the goal", state.page),
                });
            }
        }
        let model = super::model::WorldModel::build(self)?;
        if let Some(mut minimal) = model.all_minimal_goal_paths(10_000) {
            let mut recorded = self.solution_paths.clone();
            minimal.sort();
            recorded.sort();
            if minimal != recorded {
                return Err(WorldError::InconsistentSolution {
                    index: 0,
                    reason: format!(
                        "recorded {} solution paths, enumeration finds {}",
                        recorded.len(),
                        minimal.len()
                    ),
                });
            }
        }
        Ok(())
    }
}
