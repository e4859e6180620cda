use std::collections::BTreeMap;
use std::sync::Arc;

use super::*;
use crate::orchestrator::{log_lines, EpisodeConfig, LogLine, Outcome};
use crate::policy::ScriptedParams;
use crate::sim_env::{GenParams, ScenarioClass};
use crate::state_space::fingerprint;

fn counters(outcome: Outcome, attempts: u32, successes: u32, steps: u32) -> EpisodeCounters {
    EpisodeCounters {
        episode_id: "full/A/x".into(),
        category: "A".into(),
        outcome,
        steps_used: 10,
        backtrack_attempts: attempts,
        backtrack_successes: successes,
        backtrack_steps_total: steps,
    }
}

#[test]
fn five_episode_example() {
    let c = [
        counters(Outcome::Done, 0, 0, 0),
        counters(Outcome::Done, 1, 1, 2),
        counters(Outcome::Fail, 2, 1, 3),
        counters(Outcome::Done, 0, 0, 0),
        counters(Outcome::Fail, 1, 0, 1),
    ];
    let m = compute_metrics(&c);
    assert_eq!(m.accuracy, Some(0.6));
    assert_eq!(m.backtracking_task_rate, Some(0.6));
    assert_eq!(m.backtrack_success_rate, Some(0.5));
    assert_eq!(m.avg_backtrack_steps, Some(1.5));
}

#[test]
fn empty_denominators_are_null() {
    let m = compute_metrics(&[counters(Outcome::Done, 0, 0, 0)]);
    assert_eq!(m.backtrack_success_rate, None);
    assert_eq!(m.avg_backtrack_steps, None);
    let json = serde_json::to_value(&m).unwrap();
    assert!(json["backtrack_success_rate"].is_null());
    let empty = compute_metrics(&[]);
    assert_eq!(empty.accuracy, None);
}

#[test]
fn metrics_ignore_episode_order() {
    let mut c: Vec<EpisodeCounters> = (0..20)
        .map(|i| counters(if i % 3 == 0 { Outcome::Fail } else { Outcome::Done }, i % 4, (i % 4) / 2, i % 5))
        .collect();
    let a = compute_metrics(&c);
    c.reverse();
    c.rotate_left(7);
    assert_eq!(compute_metrics(&c), a);
}

fn suite_config(policy: PolicyChoice, parallelism: usize) -> SuiteConfig {
    SuiteConfig {
        episode: EpisodeConfig::default(),
        policy,
        parallelism,
        variant: "full".into(),
    }
}

fn small_suite() -> Vec<SuiteWorld> {
    let mut specs = Vec::new();
    for (i, class) in ScenarioClass::ALL.into_iter().enumerate() {
        for seed in 0..3 {
            specs.push((
                class,
                GenParams {
                    depth: 4,
                    branching: 2,
                    n_traps: if class == ScenarioClass::A { 0 } else { 1 },
                    seed: seed + 10 * i as u64,
                    ..Default::default()
                },
            ));
        }
    }
    generate_suite(&specs).unwrap()
}

#[test]
fn metrics_from_logs_equal_metrics_from_results() {
    let worlds = small_suite();
    for policy in [
        PolicyChoice::Oracle,
        PolicyChoice::Blind,
        PolicyChoice::Scripted(ScriptedParams {
            knowledge: 0.5,
            wrong_branch_bias: 0.7,
            detection_depth: None,
            seed: 3,
        }),
    ] {
        let results = run_worlds(&worlds, &suite_config(policy, 1)).unwrap();
        let lines: Vec<LogLine> = results.iter().flat_map(log_lines).collect();
        let from_logs = counters_from_log(&lines).unwrap();
        let from_results: Vec<EpisodeCounters> = results.iter().map(EpisodeCounters::from_result).collect();
        assert_eq!(from_logs, from_results);
        assert_eq!(compute_metrics(&from_logs), metrics_from_results(&results));
    }
}

#[test]
fn replay_is_clean_and_detects_tampering() {
    let worlds = small_suite();
    let by_digest: BTreeMap<String, Arc<crate::sim_env::WorldSpec>> =
        worlds.iter().map(|w| (w.digest.clone(), w.spec.clone())).collect();
    let config = suite_config(PolicyChoice::Scripted(ScriptedParams::default()), 1);
    let results = run_worlds(&worlds, &config).unwrap();
    let lines: Vec<LogLine> = results.iter().flat_map(log_lines).collect();
    let report = replay(&lines, |d| by_digest.get(d).cloned()).unwrap();
    assert!(report.is_clean(), "{report:?}");
    assert_eq!(report.episodes, worlds.len());

    let mut tampered = lines.clone();
    tampered[2].state_to = fingerprint(b"{\"page\":\"elsewhere\"}").unwrap();
    let report = replay(&tampered, |d| by_digest.get(d).cloned()).unwrap();
    assert_eq!(report.divergence.unwrap().line, 3);

    let err = replay(&lines, |_| Some(worlds[0].spec.clone()));
    let mismatch = lines.iter().any(|l| digest_of(&l.episode_id) != worlds[0].digest);
    assert!(mismatch);
    assert!(matches!(err, Err(HarnessError::ReplayWorldMismatch { .. })));
}

#[test]
fn serial_and_parallel_runs_agree() {
    let worlds = small_suite();
    let policy = PolicyChoice::Scripted(ScriptedParams {
        wrong_branch_bias: 0.6,
        ..Default::default()
    });
    let serial = run_worlds(&worlds, &suite_config(policy.clone(), 1)).unwrap();
    let parallel = run_worlds(&worlds, &suite_config(policy, 8)).unwrap();
    assert_eq!(serial, parallel);
}

#[test]
fn parallelism_is_bounded() {
    let worlds = small_suite();
    assert!(run_worlds(&worlds, &suite_config(PolicyChoice::Oracle, 0)).is_err());
    assert!(run_worlds(&worlds, &suite_config(PolicyChoice::Oracle, MAX_PARALLELISM + 1)).is_err());
}

#[test]
fn unreachable_remote_endpoint_fails_episodes_not_the_suite() {
    let worlds = &small_suite()[..2];
    let mut remote = crate::policy::RemoteConfig::new("http://127.0.0.1:9");
    remote.timeout = std::time::Duration::from_millis(500);
    let results = run_worlds(worlds, &suite_config(PolicyChoice::Remote(remote), 1)).unwrap();
    for r in &results {
        assert_eq!(r.outcome, Outcome::Fail);
        assert!(r.diagnostic.as_ref().unwrap().contains("planner"));
    }
}

#[test]
fn manifest_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let specs = forced_outcome_suite(0);
    let worlds = generate_suite(&specs).unwrap();
    let manifest = write_worlds(dir.path(), &specs, &worlds).unwrap();
    let loaded = load_manifest(&manifest).unwrap();
    assert_eq!(loaded.len(), 30);
    for (a, b) in loaded.iter().zip(&worlds) {
        assert_eq!(a.digest, b.digest);
        assert_eq!(*a.spec, *b.spec);
    }
    // Corrupt one world file: the digest check catches it.
    let victim = dir.path().join(format!("{}.json", worlds[0].digest));
    let text = std::fs::read_to_string(&victim).unwrap().replace("\"task\":\"", "\"task\":\"x");
    std::fs::write(&victim, text).unwrap();
    assert!(matches!(load_manifest(&manifest), Err(HarnessError::WorldDigestMismatch { .. })));
}

#[test]
fn outputs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let worlds = small_suite();
    let results = run_worlds(&worlds, &suite_config(PolicyChoice::Oracle, 2)).unwrap();
    let summary = SuiteSummary::new("full", "oracle", &results);
    write_suite_outputs(dir.path(), &summary, &results).unwrap();
    let text = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    for row in ["Backtracking Task Rate", "Backtrack Success Rate", "Average Backtrack Steps", "35.8%", "65.5%", "2.72"] {
        assert!(text.contains(row), "missing {row}");
    }
    let csv = std::fs::read_to_string(dir.path().join("per_category.csv")).unwrap();
    assert!(csv.starts_with("category,episodes,done,accuracy\nA,3,3,"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["metrics"]["episodes"], 12);
}
