//! Remote adapter against a throwaway HTTP server on localhost.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use beap_core::orchestrator::{run_episode, EpisodeConfig, EpisodeEvent};
use beap_core::plan::SubtaskStatus;
use beap_core::policy::{PolicyError, RemoteConfig, RemotePolicy, StateView, TaskSpec};
use beap_core::sim_env::{Environment, GoalSpec, ScenarioClass, SimEnv, WorldSpec};
use beap_core::state_space::{ActionSpec, FailureLedger};
use serde_json::{json, Value};

/// Serves every request with `reply(request_body) -> (status, body, delay)`.
fn serve<F>(reply: F) -> String
where
    F: Fn(&Value) -> (u16, String, Duration) + Send + Sync + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let reply = Arc::new(reply);
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let reply = reply.clone();
            thread::spawn(move || handle(stream, &*reply));
        }
    });
    format!("http://{addr}")
}

fn handle(mut stream: TcpStream, reply: &dyn Fn(&Value) -> (u16, String, Duration)) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut length = 0;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                length = value.trim().parse().unwrap();
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).unwrap();
    let request: Value = serde_json::from_slice(&body).unwrap();
    let (status, text, delay) = reply(&request);
    thread::sleep(delay);
    let head = format!(
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        text.len()
    );
    let _ = stream.write_all(head.as_bytes());
    let _ = stream.write_all(text.as_bytes());
}

fn chain_world() -> Arc<WorldSpec> {
    let click = ActionSpec::click;
    Arc::new(
        WorldSpec::from_edges(
            ScenarioClass::A,
            "reach p3",
            "p0",
            &[
                ("p0", click("a"), "p1", true),
                ("p1", click("b"), "p2", true),
                ("p2", click("c"), "p3", true),
            ],
            GoalSpec {
                pages: vec!["p3".into()],
                required_text: None,
            },
            &[],
        )
        .unwrap(),
    )
}

fn plan_once(endpoint: String, timeout: Duration) -> Result<beap_core::plan::Plan, PolicyError> {
    let mut config = RemoteConfig::new(endpoint);
    config.timeout = timeout;
    let policy = RemotePolicy::new(config).unwrap().policy_set();
    let world = chain_world();
    let env = SimEnv::new(world);
    let obs = env.observation();
    let available = env.available_actions();
    let view = StateView {
        fingerprint: env.fingerprint(),
        observation: &obs,
        available: &available,
    };
    let task = TaskSpec {
        description: "reach p3".into(),
    };
    policy.planner.plan(&view, &task, &FailureLedger::default())
}

#[test]
fn planner_response_becomes_pending_plan() {
    let endpoint = serve(|req| {
        assert_eq!(req["role"], "planner");
        assert_eq!(req["version"], "beap/1");
        let body = json!({"plan": {"subtasks": [{"text": "open menu"}, {"text": "click save"}]}});
        (200, body.to_string(), Duration::ZERO)
    });
    let plan = plan_once(endpoint, Duration::from_secs(5)).unwrap();
    assert_eq!(plan.len(), 2);
    assert!(plan.subtasks.iter().all(|s| s.status == SubtaskStatus::Pending));
    assert_eq!(plan.subtasks[1].text, "click save");
}

#[test]
fn truncated_body_reports_offset() {
    let body = r#"{"plan": {"subtasks": [{"text": "open"#;
    let endpoint = serve(move |_| (200, body.to_string(), Duration::ZERO));
    match plan_once(endpoint, Duration::from_secs(5)) {
        Err(PolicyError::PolicyProtocolError { offset, .. }) => assert_eq!(offset, body.len()),
        other => panic!("expected protocol error, got {other:?}"),
    }
}

#[test]
fn unknown_fields_are_protocol_errors() {
    let endpoint = serve(|_| (200, r#"{"plan": {"subtasks": []}, "extra": 1}"#.into(), Duration::ZERO));
    assert!(matches!(
        plan_once(endpoint, Duration::from_secs(5)),
        Err(PolicyError::PolicyProtocolError { .. })
    ));
}

#[test]
fn non_success_status_is_endpoint_error() {
    let endpoint = serve(|_| (503, "overloaded".into(), Duration::ZERO));
    match plan_once(endpoint, Duration::from_secs(5)) {
        Err(PolicyError::PolicyEndpointError { status, body }) => {
            assert_eq!(status, 503);
            assert_eq!(body, "overloaded");
        }
        other => panic!("expected endpoint error, got {other:?}"),
    }
}

#[test]
fn slow_server_times_out() {
    let endpoint = serve(|_| (200, "{}".into(), Duration::from_secs(3)));
    match plan_once(endpoint, Duration::from_millis(300)) {
        Err(PolicyError::PolicyTimeout { role, after_ms }) => {
            assert_eq!(role, "planner");
            assert_eq!(after_ms, 300);
        }
        other => panic!("expected timeout, got {other:?}"),
    }
}

#[test]
fn reverted_plan_is_rejected_by_orchestrator() {
    let tracker_calls = Arc::new(AtomicUsize::new(0));
    let calls = tracker_calls.clone();
    let endpoint = serve(move |req| {
        let body = match req["role"].as_str().unwrap() {
            "planner" => json!({"plan": {"subtasks": [{"text": "t1"}, {"text": "t2"}]}}),
            "executor" => json!({"action": req["available"][0]}),
            _ => {
                let n = calls.fetch_add(1, Ordering::SeqCst);
                let (t1, status) = match n {
                    0 => ("COMPLETED", "CONTINUE"),
                    1 => ("PENDING", "CONTINUE"),
                    2 => ("COMPLETED", "CONTINUE"),
                    _ => ("COMPLETED", "DONE"),
                };
                json!({"plan": {"subtasks": [{"text": "t1", "status": t1}, {"text": "t2"}]}, "status": status})
            }
        };
        (200, body.to_string(), Duration::ZERO)
    });
    let world = chain_world();
    let policies = RemotePolicy::new(RemoteConfig::new(endpoint)).unwrap().policy_set();
    let mut env = SimEnv::new(world.clone());
    let task = TaskSpec {
        description: world.task.clone(),
    };
    let result = run_episode(&mut env, &policies, &task, &EpisodeConfig::default(), "remote").unwrap();
    let rejected: Vec<_> = result
        .events
        .iter()
        .filter(|e| matches!(e, EpisodeEvent::PlanUpdateRejected { .. }))
        .collect();
    assert_eq!(rejected.len(), 1, "{:?}", result.events);
    assert_eq!(result.final_plan.subtasks[0].status, SubtaskStatus::Completed);
    assert!(tracker_calls.load(Ordering::SeqCst) >= 2);
}
