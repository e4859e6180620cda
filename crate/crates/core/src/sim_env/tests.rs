use std::collections::BTreeSet;
use std::sync::Arc;

use super::*;
use crate::state_space::ActionSpec;

fn params(depth: u32, branching: u32, n_traps: u32, k: u32, seed: u64) -> GenParams {
    GenParams {
        depth,
        branching,
        n_traps,
        irreversible_fraction: 0.3,
        detection_depth: k,
        seed,
    }
}

#[test]
fn observation_fingerprint_is_canonical() {
    let obs = Observation {
        elements: vec!["b1".into(), "b2".into()],
        page: "p0".into(),
        text: String::new(),
    };
    assert_eq!(obs.canonical_json(), r#"{"elements":["b1","b2"],"page":"p0","text":""}"#);
    assert_eq!(
        obs.fingerprint().to_hex(),
        "cd12eddf04fde39cf0c04f6052849139afcb6fdb47e0f01dd0f1667fc552c782"
    );
}

#[test]
fn generation_is_deterministic() {
    for class in ScenarioClass::ALL {
        let p = params(4, 2, if class == ScenarioClass::A { 0 } else { 1 }, 2, 17);
        let a = generate_world(class, &p).unwrap();
        let b = generate_world(class, &p).unwrap();
        assert_eq!(a.to_canonical_json(), b.to_canonical_json());
        assert_eq!(a.digest(), b.digest());
        let other = generate_world(class, &GenParams { seed: 18, ..p }).unwrap();
        assert_ne!(a.digest(), other.digest());
    }
}

#[test]
fn world_json_round_trips_through_validation() {
    let w = generate_world(ScenarioClass::C, &params(5, 3, 2, 2, 4)).unwrap();
    let back = WorldSpec::from_json(&w.to_canonical_json()).unwrap();
    assert_eq!(back, w);
}

#[test]
fn class_a_chain_is_solved_in_three_steps() {
    let w = generate_world(ScenarioClass::A, &params(3, 1, 0, 2, 1)).unwrap();
    assert_eq!(w.transitions.len(), 3);
    let model = WorldModel::build(&w).unwrap();
    let path = model.shortest_goal_path(&model.initial(), &BTreeSet::new()).unwrap();
    assert_eq!(path.len(), 3);
    let mut env = SimEnv::new(Arc::new(w));
    for (_, a) in &path {
        env.step(a).unwrap();
    }
    assert!(env.goal_satisfied());
}

#[test]
fn class_a_has_no_dead_ends() {
    for seed in 0..20 {
        let w = generate_world(ScenarioClass::A, &params(3, 3, 0, 2, seed)).unwrap();
        let model = WorldModel::build(&w).unwrap();
        assert!(model.states().all(|s| s.viable), "seed {seed}");
    }
}

#[test]
fn class_b_decoy_needs_more_than_one_upward_edge() {
    let w = generate_world(ScenarioClass::B, &params(4, 2, 1, 2, 3)).unwrap();
    let model = WorldModel::build(&w).unwrap();
    let decoy = &w.decoys[0];
    assert_eq!(decoy.page, "p1");
    // Walk the decoy chain and check that its depth-2 state has a decoy
    // parent and that no decoy state can reach the goal.
    let p1 = model.states().find(|s| s.state.page == "p1").unwrap().fingerprint;
    let d1 = model.successor(&p1, &decoy.action).unwrap();
    let d1_info = model.state(&d1).unwrap();
    assert!(!d1_info.viable);
    let (_, d2, _) = &d1_info.successors[0];
    let parent = &model.state(d2).unwrap().bfs_parent.as_ref().unwrap().0;
    assert_eq!(*parent, d1);
    assert!(!model.is_viable(parent));
    for seed in 0..50 {
        let w = generate_world(ScenarioClass::B, &params(5, 3, 2, 3, seed)).unwrap();
        check_decoy_depth(&w).unwrap();
        assert_eq!(w.solution_paths.len(), 1);
    }
}

#[test]
fn contradictory_params_are_rejected() {
    assert!(matches!(
        generate_world(ScenarioClass::B, &params(2, 2, 0, 2, 0)),
        Err(GenParamError::Contradictory { .. })
    ));
    assert!(matches!(
        generate_world(ScenarioClass::B, &params(5, 2, 0, 1, 0)),
        Err(GenParamError::Contradictory { .. })
    ));
    assert!(matches!(
        generate_world(ScenarioClass::A, &params(3, 2, 1, 2, 0)),
        Err(GenParamError::Contradictory { .. })
    ));
    assert!(matches!(
        generate_world(ScenarioClass::C, &params(2, 2, 0, 2, 0)),
        Err(GenParamError::Contradictory { .. })
    ));
    assert!(matches!(
        generate_world(ScenarioClass::A, &GenParams { irreversible_fraction: 1.5, ..params(2, 2, 0, 2, 0) }),
        Err(GenParamError::BadFraction)
    ));
}

#[test]
fn class_u_goal_is_unreachable() {
    for seed in 0..20 {
        let w = generate_world(ScenarioClass::U, &params(4, 2, 1, 2, seed)).unwrap();
        let model = WorldModel::build(&w).unwrap();
        assert!(!model.goal_reachable());
        assert!(model.states().all(|s| !s.goal));
        assert!(w.solution_paths.is_empty());
    }
}

#[test]
fn class_c_revision_points_past_the_milestone() {
    for seed in 0..20 {
        let w = generate_world(ScenarioClass::C, &params(5, 2, 1, 2, seed)).unwrap();
        let hint = w.revision.as_ref().unwrap();
        let model = WorldModel::build(&w).unwrap();
        let at = model.states().find(|s| s.state.page == hint.page).unwrap();
        let stale = model.successor(&at.fingerprint, &hint.stale).unwrap();
        assert!(!model.is_viable(&stale));
        assert!(model.is_trap(&stale));
        let actual = model.successor(&at.fingerprint, &hint.actual).unwrap();
        assert!(model.is_viable(&actual));
        let milestone = model.states().find(|s| s.state.page == hint.milestone).unwrap();
        assert!(milestone.depth < at.depth);
    }
}

#[test]
fn inverse_round_trips_on_reversible_edges() {
    let mut checked = 0;
    let mut seed = 0;
    while checked < 100 {
        let w = Arc::new(generate_world(ScenarioClass::B, &params(4, 3, 1, 2, seed)).unwrap());
        seed += 1;
        for t in w.transitions.iter().filter(|t| t.reversible) {
            let model = WorldModel::build(&w).unwrap();
            let from = model.states().find(|s| s.state.page == t.from).unwrap();
            let mut env = SimEnv::new(w.clone());
            let path = bfs_actions(&model, &from.fingerprint);
            for a in &path {
                env.step(a).unwrap();
            }
            let before = env.fingerprint();
            let out = env.step(&t.action).unwrap();
            assert!(out.reversible);
            let back = env.step(&ActionSpec::inverse(out.op)).unwrap();
            assert_eq!(back.fingerprint, before);
            checked += 1;
            if checked == 100 {
                break;
            }
        }
    }
}

fn bfs_actions(model: &WorldModel, target: &crate::state_space::StateFingerprint) -> Vec<ActionSpec> {
    let mut out = Vec::new();
    let mut cur = *target;
    while let Some((p, a)) = model.state(&cur).unwrap().bfs_parent.clone() {
        out.push(a);
        cur = p;
    }
    out.reverse();
    out
}

#[test]
fn irreversible_edges_refuse_inverse() {
    let w = Arc::new(
        generate_world(
            ScenarioClass::A,
            &GenParams {
                irreversible_fraction: 1.0,
                ..params(2, 2, 0, 2, 5)
            },
        )
        .unwrap(),
    );
    let mut env = SimEnv::new(w);
    let a = env.available_actions()[0].clone();
    let out = env.step(&a).unwrap();
    assert!(!out.reversible);
    assert_eq!(
        env.step(&ActionSpec::inverse(out.op)),
        Err(EnvError::IrreversibleAction { step: out.op })
    );
}

#[test]
fn inverse_requires_being_in_the_post_state() {
    let w = Arc::new(
        generate_world(
            ScenarioClass::A,
            &GenParams {
                irreversible_fraction: 0.0,
                ..params(2, 1, 0, 2, 5)
            },
        )
        .unwrap(),
    );
    let mut env = SimEnv::new(w);
    let first = env.step(&env.available_actions()[0].clone()).unwrap();
    env.step(&env.available_actions()[0].clone()).unwrap();
    assert!(matches!(
        env.step(&ActionSpec::inverse(first.op)),
        Err(EnvError::IrreversibleAction { .. })
    ));
    assert!(matches!(
        env.step(&ActionSpec::inverse(99)),
        Err(EnvError::IrreversibleAction { step: 99 })
    ));
}

#[test]
fn checkpoint_restore_is_idempotent() {
    let w = Arc::new(generate_world(ScenarioClass::B, &params(5, 2, 1, 2, 9)).unwrap());
    let mut env = SimEnv::new(w);
    let a = env.available_actions()[0].clone();
    env.step(&a).unwrap();
    let saved = env.fingerprint();
    let token = env.checkpoint();
    let b = env.available_actions()[0].clone();
    env.step(&b).unwrap();
    assert_ne!(env.fingerprint(), saved);
    let ops = env.op_count();
    assert_eq!(env.restore(token).unwrap().fingerprint, saved);
    assert_eq!(env.restore(token).unwrap().fingerprint, saved);
    assert_eq!(env.op_count(), ops + 2);
    env.release(token);
    assert_eq!(env.restore(token), Err(EnvError::CheckpointError(token.0)));
    let fresh = env.checkpoint();
    assert_ne!(fresh, token);
}

#[test]
fn illegal_actions_are_reported() {
    let w = Arc::new(generate_world(ScenarioClass::A, &params(2, 2, 0, 2, 0)).unwrap());
    let mut env = SimEnv::new(w);
    let bogus = ActionSpec::click("nope");
    assert!(matches!(env.step(&bogus), Err(EnvError::IllegalAction { .. })));
}

#[test]
fn reset_restores_initial_state() {
    let w = Arc::new(generate_world(ScenarioClass::C, &params(4, 2, 1, 2, 2)).unwrap());
    let mut env = SimEnv::new(w);
    let start = env.fingerprint();
    env.step(&env.available_actions()[0].clone()).unwrap();
    let token = env.checkpoint();
    env.reset();
    assert_eq!(env.fingerprint(), start);
    assert_eq!(env.op_count(), 0);
    assert!(env.restore(token).is_err());
}

#[test]
fn solution_paths_are_checked_against_enumeration() {
    let mut w = generate_world(ScenarioClass::A, &params(2, 2, 0, 2, 3)).unwrap();
    w.solution_paths.pop();
    assert!(matches!(w.validate(), Err(WorldError::InconsistentSolution { .. })));
    let mut w = generate_world(ScenarioClass::B, &params(4, 2, 0, 2, 3)).unwrap();
    w.transitions.pop();
    assert!(w.validate().is_err());
}
