//! Property tests over generated worlds and reference policies.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use beap_core::harness::{generate_suite, run_world, PolicyChoice, SuiteConfig, SuiteWorld};
use beap_core::orchestrator::{BacktrackScope, EpisodeConfig, EpisodeEvent, Outcome};
use beap_core::plan::Plan;
use beap_core::policy::{
    BacktrackAct, Executor, Planner, PolicyError, PolicySet, ScriptedParams, StateView, TaskSpec, Tracker,
};
use beap_core::sim_env::{
    EnvState, Environment, GenParams, Observation, ScenarioClass, SimEnv, WorldModel, WorldSpec,
};
use beap_core::state_space::{ActionSpec, FailureLedger, StateFingerprint, Trajectory};
use beap_core::status::{BackStatus, ExecStatus};
use proptest::prelude::*;

fn class_strategy() -> impl Strategy<Value = ScenarioClass> {
    prop_oneof![
        Just(ScenarioClass::A),
        Just(ScenarioClass::B),
        Just(ScenarioClass::C),
        Just(ScenarioClass::U),
    ]
}

fn world_strategy() -> impl Strategy<Value = Arc<WorldSpec>> {
    (class_strategy(), 3u32..6, 1u32..4, 0u32..3, 0.0f64..1.0, any::<u64>()).prop_map(
        |(class, depth, branching, traps, irreversible, seed)| {
            let params = GenParams {
                depth,
                branching,
                n_traps: if class == ScenarioClass::A { 0 } else { traps },
                irreversible_fraction: irreversible,
                detection_depth: 2.min(depth - 1),
                seed,
            };
            generate_suite(&[(class, params)]).unwrap().remove(0).spec
        },
    )
}

/// All (page, text) states reachable from the initial state, found without
/// the world model.
fn reachable_states(spec: &WorldSpec) -> BTreeSet<EnvState> {
    let index = spec.transition_index();
    let start = spec.initial_state();
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    while let Some(state) = queue.pop_front() {
        for ((from, action), (to, _)) in &index {
            if *from != state.page {
                continue;
            }
            let next = EnvState {
                page: to.clone(),
                text: format!("{}{}", state.text, action.payload().unwrap_or("")),
            };
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    seen
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fingerprints_are_a_bijection_on_reachable_states(world in world_strategy()) {
        let states = reachable_states(&world);
        prop_assume!(states.len() <= 512);
        let fps: BTreeMap<StateFingerprint, EnvState> = states
            .iter()
            .map(|s| (Observation::of(&world, s).fingerprint(), s.clone()))
            .collect();
        prop_assert_eq!(fps.len(), states.len());
        let model = WorldModel::build(&world).unwrap();
        let model_fps: BTreeSet<StateFingerprint> = model.states().map(|s| s.fingerprint).collect();
        prop_assert_eq!(model_fps, fps.keys().copied().collect::<BTreeSet<_>>());
    }

    #[test]
    fn identical_action_sequences_give_identical_observations(
        world in world_strategy(),
        choices in prop::collection::vec(any::<prop::sample::Index>(), 1..20),
    ) {
        let mut first = SimEnv::new(world.clone());
        let mut second = SimEnv::new(world);
        for choice in choices {
            let available = first.available_actions();
            prop_assert_eq!(&available, &second.available_actions());
            if available.is_empty() {
                break;
            }
            let action = choice.get(&available);
            let a = first.step(action).unwrap();
            let b = second.step(action).unwrap();
            prop_assert_eq!(a.fingerprint, b.fingerprint);
            prop_assert_eq!(a.observation, b.observation);
        }
    }

    #[test]
    fn reversible_steps_invert_to_their_pre_state(
        world in world_strategy(),
        choices in prop::collection::vec(any::<prop::sample::Index>(), 1..12),
    ) {
        let mut env = SimEnv::new(world);
        for choice in choices {
            let available = env.available_actions();
            if available.is_empty() {
                break;
            }
            let before = env.fingerprint();
            let out = env.step(choice.get(&available)).unwrap();
            if out.reversible {
                let back = env.step(&ActionSpec::inverse(out.op)).unwrap();
                prop_assert_eq!(back.fingerprint, before);
                env.step(choice.get(&available)).unwrap();
            } else {
                prop_assert!(env.step(&ActionSpec::inverse(out.op)).is_err());
            }
        }
    }

    #[test]
    fn episodes_keep_their_invariants(
        world in world_strategy(),
        knowledge in 0.0f64..=1.0,
        bias in 0.0f64..=1.0,
        seed in any::<u64>(),
        single_step in any::<bool>(),
        enable_backtrack in any::<bool>(),
        enable_tracker in any::<bool>(),
    ) {
        let mut episode = EpisodeConfig {
            seed,
            backtrack_scope: if single_step { BacktrackScope::SingleStep } else { BacktrackScope::MultiLevel },
            ..Default::default()
        };
        episode.ablation.enable_backtrack = enable_backtrack;
        episode.ablation.enable_tracker = enable_tracker;
        let config = SuiteConfig {
            episode,
            policy: PolicyChoice::Scripted(ScriptedParams { knowledge, wrong_branch_bias: bias, detection_depth: None, seed }),
            parallelism: 1,
            variant: "prop".into(),
        };
        let world = SuiteWorld::new((*world).clone());
        let r = run_world(&world, &config);
        prop_assert!(r.diagnostic.as_deref().is_none_or(|d| !d.contains("panicked")), "{:?}", r.diagnostic);
        prop_assert!(r.steps_used <= 50);
        prop_assert!(r.backtrack_successes <= r.backtrack_attempts);
        prop_assert!(r.trajectory.check_invariants().is_ok());
        if !enable_backtrack || !enable_tracker {
            prop_assert_eq!(r.backtrack_attempts, 0);
        }
        if r.outcome == Outcome::Done {
            let model = WorldModel::build(&world.spec).unwrap();
            prop_assert!(model.is_goal(&r.final_state));
        }
        if world.class == ScenarioClass::U {
            prop_assert!(r.outcome != Outcome::Done);
        }
        let count = |f: fn(&EpisodeEvent) -> bool| r.events.iter().filter(|e| f(e)).count();
        let recovered = count(|e| matches!(e, EpisodeEvent::BacktrackFinished { recovered: true, .. }));
        prop_assert_eq!(recovered as u32, r.backtrack_successes);
        prop_assert_eq!(count(|e| matches!(e, EpisodeEvent::FailureRecorded { .. })), recovered);
        prop_assert_eq!(count(|e| matches!(e, EpisodeEvent::Replanned { .. })), recovered);
        let revisions: Vec<u64> = r.trajectory.steps().iter().map(|s| s.plan_revision).collect();
        prop_assert!(revisions.windows(2).all(|w| w[0] <= w[1]));
        if !enable_tracker {
            prop_assert!(revisions.iter().all(|v| *v == 0));
        }
    }
}

#[test]
fn repeated_steps_from_a_checkpoint_have_one_successor() {
    for seed in 0..4 {
        let world = generate_suite(&[(ScenarioClass::B, GenParams { depth: 4, seed, ..Default::default() })])
            .unwrap()
            .remove(0)
            .spec;
        let model = WorldModel::build(&world).unwrap();
        let mut env = SimEnv::new(world);
        // Walk to a mid-depth state, then probe each of its actions.
        while !env.available_actions().is_empty() && model.state(&env.fingerprint()).unwrap().depth < 2 {
            let a = env.available_actions()[0].clone();
            env.step(&a).unwrap();
        }
        let token = env.checkpoint();
        for action in env.available_actions() {
            let successors: BTreeSet<StateFingerprint> = (0..1000)
                .map(|_| {
                    env.restore(token).unwrap();
                    env.step(&action).unwrap().fingerprint
                })
                .collect();
            assert_eq!(successors.len(), 1, "seed {seed}, {action}");
        }
    }
}

/// Wraps reference policies and checks every output against its contract.
#[derive(Clone, Default)]
struct Audit {
    calls: Arc<AtomicUsize>,
    violations: Arc<Mutex<Vec<String>>>,
}

impl Audit {
    fn check(&self, ok: bool, what: impl FnOnce() -> String) {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if !ok {
            self.violations.lock().unwrap().push(what());
        }
    }

    fn wrap(&self, inner: PolicySet) -> PolicySet {
        let inner = Arc::new(inner);
        PolicySet {
            planner: Box::new(Checked(self.clone(), inner.clone())),
            executor: Box::new(Checked(self.clone(), inner.clone())),
            tracker: Box::new(Checked(self.clone(), inner)),
        }
    }
}

struct Checked(Audit, Arc<PolicySet>);

fn plan_is_well_formed(plan: &Plan) -> bool {
    plan.validate().is_ok()
        && serde_json::to_string(plan)
            .ok()
            .and_then(|j| serde_json::from_str::<Plan>(&j).ok())
            .as_ref()
            == Some(plan)
}

impl Planner for Checked {
    fn plan(&self, s: &StateView<'_>, task: &TaskSpec, failures: &FailureLedger) -> Result<Plan, PolicyError> {
        let out = self.1.planner.plan(s, task, failures);
        self.0.check(out.as_ref().is_ok_and(plan_is_well_formed), || format!("planner: {out:?}"));
        out
    }
}

impl Executor for Checked {
    fn act(&self, s: &StateView<'_>, task: &TaskSpec, plan: &Plan, history: &Trajectory) -> Result<ActionSpec, PolicyError> {
        let out = self.1.executor.act(s, task, plan, history);
        let ok = out.as_ref().is_ok_and(|a| s.available.contains(a));
        self.0.check(ok, || format!("executor act: {out:?} not in {:?}", s.available));
        out
    }

    fn backtrack_act(&self, history: &Trajectory, target: &StateFingerprint) -> Result<BacktrackAct, PolicyError> {
        let out = self.1.executor.backtrack_act(history, target);
        let ok = match &out {
            Ok(BacktrackAct::Restore) => true,
            Ok(BacktrackAct::Inverse(a)) => a.inverse_of().is_some_and(|k| (k as usize) < history.len()),
            Err(_) => false,
        };
        self.0.check(ok, || format!("executor backtrack: {out:?}"));
        out
    }
}

impl Tracker for Checked {
    fn track(
        &self,
        s: &StateView<'_>,
        task: &TaskSpec,
        plan: &Plan,
        history: &Trajectory,
        failures: &FailureLedger,
    ) -> Result<(Plan, ExecStatus), PolicyError> {
        let out = self.1.tracker.track(s, task, plan, history, failures);
        let ok = out
            .as_ref()
            .is_ok_and(|(p, _)| plan_is_well_formed(p) && plan.check_monotone(p).is_ok());
        self.0.check(ok, || format!("tracker: {out:?}"));
        out
    }

    fn verify_backtrack(&self, s: &StateView<'_>, target: &StateFingerprint, history: &Trajectory) -> Result<BackStatus, PolicyError> {
        let out = self.1.tracker.verify_backtrack(s, target, history);
        let expected = if s.fingerprint == *target { BackStatus::Recovered } else { BackStatus::NotRecovered };
        self.0.check(out.as_ref().is_ok_and(|b| *b == expected), || format!("verify: {out:?}"));
        out
    }
}

#[test]
fn reference_policies_honour_their_contracts() {
    let audit = Audit::default();
    let mut seed = 0u64;
    let classes = ScenarioClass::ALL;
    while audit.calls.load(Ordering::Relaxed) < 10_000 {
        let class = classes[(seed % 4) as usize];
        let params = GenParams {
            depth: 3 + (seed % 4) as u32,
            branching: 1 + (seed % 3) as u32,
            n_traps: if class == ScenarioClass::A { 0 } else { (seed % 3) as u32 },
            irreversible_fraction: (seed % 5) as f64 / 5.0,
            detection_depth: 2,
            seed,
        };
        let world = generate_suite(&[(class, params)]).unwrap().remove(0);
        let choice = match seed % 3 {
            0 => PolicyChoice::Oracle,
            1 => PolicyChoice::Blind,
            _ => PolicyChoice::Scripted(ScriptedParams {
                knowledge: (seed % 4) as f64 / 3.0,
                wrong_branch_bias: (seed % 5) as f64 / 4.0,
                detection_depth: None,
                seed,
            }),
        };
        let policies = audit.wrap(choice.build(&world).unwrap());
        let mut env = SimEnv::new(world.spec.clone());
        let task = TaskSpec {
            description: world.spec.task.clone(),
        };
        let config = EpisodeConfig {
            seed,
            ..Default::default()
        };
        beap_core::orchestrator::run_episode(&mut env, &policies, &task, &config, format!("audit/{seed}")).unwrap();
        seed += 1;
    }
    let violations = audit.violations.lock().unwrap();
    assert!(violations.is_empty(), "{} violations, first: {}", violations.len(), violations[0]);
}
