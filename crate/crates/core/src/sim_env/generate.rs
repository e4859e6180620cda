//! Seeded world generator for the four scenario classes.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::state_space::ActionSpec;

use super::model::WorldModel;
use super::world::{
    DecoyEdge, GenParams, GoalSpec, Page, PlanRevisionHint, ScenarioClass, Transition, WorldError, WorldSpec,
};

/// Generated worlds never exceed this many pages.
pub const MAX_PAGES: usize = 4096;

const WORDS: [&str; 12] = [
    "alpha", "report", "june", "invoice", "q3", "draft", "north", "fig", "ledger", "memo", "blue", "total",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenParamError {
    #[error("class {class}: {reason}")]
    Contradictory { class: ScenarioClass, reason: String },
    #[error("irreversible_fraction must lie in [0, 1]")]
    BadFraction,
    #[error("generated world is invalid: {0}")]
    Invalid(#[from] WorldError),
}

fn contradictory(class: ScenarioClass, reason: impl Into<String>) -> GenParamError {
    GenParamError::Contradictory {
        class,
        reason: reason.into(),
    }
}

struct Builder {
    rng: ChaCha8Rng,
    irreversible: f64,
    pages: Vec<Page>,
    transitions: Vec<Transition>,
    counter: u32,
}

impl Builder {
    fn new(params: &GenParams) -> Self {
        Builder {
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            irreversible: params.irreversible_fraction,
            pages: Vec::new(),
            transitions: Vec::new(),
            counter: 0,
        }
    }

    fn id(idx: usize) -> String {
        format!("p{idx}")
    }

    fn page(&mut self) -> usize {
        let idx = self.pages.len();
        self.pages.push(Page {
            id: Self::id(idx),
            elements: Vec::new(),
            actions: Vec::new(),
        });
        idx
    }

    fn random_action(&mut self) -> ActionSpec {
        self.counter += 1;
        let n = self.counter;
        match self.rng.gen_range(0..20) {
            0..=9 => ActionSpec::click(format!("btn{n}")),
            10..=13 => {
                let word = WORDS[self.rng.gen_range(0..WORDS.len())];
                ActionSpec::type_text(Some(format!("field{n}")), word)
            }
            14..=16 => ActionSpec::scroll(format!("pane{n}")),
            _ => ActionSpec::drag(format!("handle{n}")),
        }
    }

    /// New page reached from `from` by a fresh action.
    fn edge(&mut self, from: usize) -> (ActionSpec, usize) {
        let to = self.page();
        let action = self.random_action();
        self.link(from, action.clone(), to);
        (action, to)
    }

    fn link(&mut self, from: usize, action: ActionSpec, to: usize) {
        let reversible = self.rng.gen::<f64>() >= self.irreversible;
        let page = &mut self.pages[from];
        if let Some(t) = action.target() {
            page.elements.push(t.to_string());
        }
        page.actions.push(action.clone());
        self.transitions.push(Transition {
            from: Self::id(from),
            action,
            to: Self::id(to),
            reversible,
        });
    }

    /// Dead-end subtree below `from` of depth at most `depth`.
    fn dead_region(&mut self, from: usize, depth: u32) {
        let (_, child) = self.edge(from);
        if depth > 1 {
            let fan = self.rng.gen_range(0..=2);
            for _ in 0..fan {
                self.dead_region(child, depth - 1);
            }
        }
    }

    fn traps(&mut self, anchors: &[usize], n: u32) -> Vec<String> {
        (0..n)
            .map(|_| {
                let at = anchors[self.rng.gen_range(0..anchors.len())];
                Self::id(self.edge(at).1)
            })
            .collect()
    }

    /// Main chain of `depth` edges from a fresh root; returns pages and actions.
    fn chain(&mut self, depth: u32) -> (Vec<usize>, Vec<ActionSpec>) {
        let mut pages = vec![self.page()];
        let mut actions = Vec::new();
        for _ in 0..depth {
            let (a, to) = self.edge(*pages.last().expect("chain starts non-empty"));
            actions.push(a);
            pages.push(to);
        }
        (pages, actions)
    }

    fn side_branches(&mut self, anchors: &[usize], extra: impl Fn(usize) -> u32) {
        for (i, &p) in anchors.iter().enumerate() {
            for _ in 0..extra(i) {
                let depth = self.rng.gen_range(1..=2);
                self.dead_region(p, depth);
            }
        }
    }

    fn finish(self, category: ScenarioClass, params: &GenParams, parts: Parts) -> WorldSpec {
        let mut pages = self.pages;
        for p in &mut pages {
            p.elements.sort();
            p.elements.dedup();
        }
        WorldSpec {
            category,
            params: Some(params.clone()),
            task: parts.task,
            initial: Self::id(0),
            pages,
            transitions: self.transitions,
            goal: parts.goal,
            traps: parts.traps,
            solution_paths: parts.solution_paths,
            decoys: parts.decoys,
            revision: parts.revision,
        }
    }
}

struct Parts {
    task: String,
    goal: GoalSpec,
    traps: Vec<String>,
    solution_paths: Vec<Vec<ActionSpec>>,
    decoys: Vec<DecoyEdge>,
    revision: Option<PlanRevisionHint>,
}

fn typed_text(actions: &[ActionSpec]) -> Option<String> {
    let text: String = actions.iter().filter_map(|a| a.payload()).collect();
    (!text.is_empty()).then_some(text)
}

fn goal_task(page: &str, text: &Option<String>) -> String {
    match text {
        Some(t) => format!("reach {page} with the text \"{t}\" entered"),
        None => format!("reach {page}"),
    }
}

pub fn check_params(class: ScenarioClass, p: &GenParams) -> Result<(), GenParamError> {
    if !(0.0..=1.0).contains(&p.irreversible_fraction) {
        return Err(GenParamError::BadFraction);
    }
    if p.depth == 0 {
        return Err(contradictory(class, "depth must be at least 1"));
    }
    if p.branching == 0 {
        return Err(contradictory(class, "branching must be at least 1"));
    }
    match class {
        ScenarioClass::A => {
            if p.n_traps > 0 {
                return Err(contradictory(class, "class A admits no traps"));
            }
            let mut total: u64 = 0;
            let mut level: u64 = 1;
            for _ in 0..=p.depth {
                total += level;
                level = level.saturating_mul(p.branching as u64);
                if total > MAX_PAGES as u64 {
                    return Err(contradictory(class, format!("tree exceeds {MAX_PAGES} pages")));
                }
            }
        }
        ScenarioClass::B => {
            if p.detection_depth < 2 {
                return Err(contradictory(class, "detection_depth must be at least 2"));
            }
            if p.depth < p.detection_depth + 1 {
                return Err(contradictory(
                    class,
                    format!("depth {} < detection_depth + 1 = {}", p.depth, p.detection_depth + 1),
                ));
            }
        }
        ScenarioClass::C => {
            if p.depth < 3 {
                return Err(contradictory(class, "depth must be at least 3"));
            }
        }
        ScenarioClass::U => {}
    }
    if p.depth as usize * (p.branching as usize + p.n_traps as usize + 4) > MAX_PAGES {
        return Err(contradictory(class, format!("world would exceed {MAX_PAGES} pages")));
    }
    Ok(())
}

/// Generate a world of the given class. Same class and params give the same
/// world byte for byte.
pub fn generate_world(class: ScenarioClass, params: &GenParams) -> Result<WorldSpec, GenParamError> {
    check_params(class, params)?;
    let mut b = Builder::new(params);
    let d = params.depth;
    let parts = match class {
        ScenarioClass::A => {
            let root = b.page();
            let mut frontier = vec![(root, Vec::<ActionSpec>::new())];
            for _ in 0..d {
                let mut next = Vec::new();
                for (p, path) in frontier {
                    for _ in 0..params.branching {
                        let (a, to) = b.edge(p);
                        let mut path = path.clone();
                        path.push(a);
                        next.push((to, path));
                    }
                }
                frontier = next;
            }
            let goal_pages: Vec<String> = frontier.iter().map(|(p, _)| Builder::id(*p)).collect();
            Parts {
                task: "open any page at the bottom of the menu tree".to_string(),
                goal: GoalSpec {
                    pages: goal_pages,
                    required_text: None,
                },
                traps: Vec::new(),
                solution_paths: frontier.into_iter().map(|(_, path)| path).collect(),
                decoys: Vec::new(),
                revision: None,
            }
        }
        ScenarioClass::B => {
            let (main, actions) = b.chain(d);
            // Decoy chain off the depth-1 node, long enough that its wrongness
            // shows only `detection_depth` steps in.
            let (decoy_action, mut cur) = b.edge(main[1]);
            for _ in 1..d - 1 {
                cur = b.edge(cur).1;
            }
            let branching = params.branching;
            b.side_branches(&main[..main.len() - 1], |i| {
                let used = if i == 1 { 2 } else { 1 };
                branching.saturating_sub(used)
            });
            let traps = b.traps(&main[..main.len() - 1], params.n_traps);
            let text = typed_text(&actions);
            let goal_page = Builder::id(main[d as usize]);
            Parts {
                task: goal_task(&goal_page, &text),
                goal: GoalSpec {
                    pages: vec![goal_page],
                    required_text: text,
                },
                traps,
                solution_paths: vec![actions],
                decoys: vec![DecoyEdge {
                    page: Builder::id(main[1]),
                    action: decoy_action,
                }],
                revision: None,
            }
        }
        ScenarioClass::C => {
            let (main, actions) = b.chain(d);
            let x = b.rng.gen_range(2..d) as usize;
            let (stale, _) = b.edge(main[x]);
            let stale_target = Builder::id(b.pages.len() - 1);
            let branching = params.branching;
            b.side_branches(&main[..main.len() - 1], |i| {
                let used = if i == x { 2 } else { 1 };
                branching.saturating_sub(used)
            });
            let mut traps = vec![stale_target];
            traps.extend(b.traps(&main[..main.len() - 1], params.n_traps));
            let text = typed_text(&actions);
            let goal_page = Builder::id(main[d as usize]);
            Parts {
                task: goal_task(&goal_page, &text),
                goal: GoalSpec {
                    pages: vec![goal_page],
                    required_text: text,
                },
                traps,
                solution_paths: vec![actions.clone()],
                decoys: Vec::new(),
                revision: Some(PlanRevisionHint {
                    milestone: Builder::id(main[1]),
                    page: Builder::id(main[x]),
                    stale,
                    actual: actions[x].clone(),
                }),
            }
        }
        ScenarioClass::U => {
            let (main, _) = b.chain(d);
            let branching = params.branching;
            b.side_branches(&main, |_| branching.saturating_sub(1));
            let traps = b.traps(&main, params.n_traps);
            let goal = b.page();
            let goal_page = Builder::id(goal);
            Parts {
                task: goal_task(&goal_page, &None),
                goal: GoalSpec {
                    pages: vec![goal_page],
                    required_text: None,
                },
                traps,
                solution_paths: Vec::new(),
                decoys: Vec::new(),
                revision: None,
            }
        }
    };
    let world = b.finish(class, params, parts);
    world.validate()?;
    if class == ScenarioClass::B {
        check_decoy_depth(&world)?;
    }
    Ok(world)
}

/// Exhaustive check that, from every decoy state at or beyond the detection
/// depth, a single upward edge never lands on the goal path.
pub fn check_decoy_depth(world: &WorldSpec) -> Result<(), GenParamError> {
    let model = WorldModel::build(world)?;
    let k = world.detection_depth();
    let on_goal_path: BTreeSet<_> = model.states().filter(|s| s.viable).map(|s| s.fingerprint).collect();
    for decoy in &world.decoys {
        let start = model
            .states()
            .find(|s| s.state.page == decoy.page && s.viable)
            .map(|s| s.fingerprint)
            .ok_or_else(|| contradictory(world.category, "decoy page unreachable"))?;
        let mut frontier = vec![(start, model.successor(&start, &decoy.action).expect("decoy is a transition"), 1u32)];
        let mut deepest = 0;
        while let Some((parent, fp, depth)) = frontier.pop() {
            deepest = deepest.max(depth);
            if depth >= k && on_goal_path.contains(&parent) {
                return Err(contradictory(
                    world.category,
                    format!("decoy state at depth {depth} is one edge from the goal path"),
                ));
            }
            let info = model.state(&fp).expect("successor is modelled");
            if info.viable {
                return Err(contradictory(world.category, "decoy branch reaches the goal"));
            }
            for (_, next, _) in &info.successors {
                frontier.push((fp, *next, depth + 1));
            }
        }
        if deepest < k {
            return Err(contradictory(
                world.category,
                format!("decoy branch ends at depth {deepest}, before detection depth {k}"),
            ));
        }
    }
    Ok(())
}
