//! Remote policy adapter: each contract call is one synchronous JSON POST to
//! `<endpoint>/v1/policy`. See `docs/wire-protocol.md` for the schema.

use std::collections::HashMap;
use std::sync::{Arc, Condvar, Mutex, OnceLock};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::plan::{Plan, Subtask, SubtaskStatus};
use crate::sim_env::Observation;
use crate::state_space::{canonical_json, ActionSpec, FailureLedger, Mode, StateFingerprint, Trajectory, TrajectoryStep};
use crate::status::{BackStatus, ExecStatus};

use super::{BacktrackAct, Executor, Planner, PolicyError, PolicySet, StateView, TaskSpec, Tracker};

pub const WIRE_VERSION: &str = "beap/1";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
/// Number of most recent trajectory steps sent with each request.
pub const TRAJECTORY_TAIL: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub timeout: Duration,
    pub max_in_flight: usize,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            timeout: DEFAULT_TIMEOUT,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
        }
    }

    fn url(&self) -> String {
        format!("{}/v1/policy", self.endpoint.trim_end_matches('/'))
    }
}

/// Counting gate bounding concurrent requests to one endpoint.
struct Gate {
    in_flight: Mutex<usize>,
    freed: Condvar,
    max: usize,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.max {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

fn gate_for(config: &RemoteConfig) -> Arc<Gate> {
    static GATES: OnceLock<Mutex<HashMap<String, Arc<Gate>>>> = OnceLock::new();
    let mut gates = GATES.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
    gates
        .entry(config.url())
        .or_insert_with(|| {
            Arc::new(Gate {
                in_flight: Mutex::new(0),
                freed: Condvar::new(),
                max: config.max_in_flight.max(1),
            })
        })
        .clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Planner,
    Executor,
    Tracker,
}

impl Role {
    fn name(self) -> &'static str {
        match self {
            Role::Planner => "planner",
            Role::Executor => "executor",
            Role::Tracker => "tracker",
        }
    }
}

/// One adapter serves all three roles.
#[derive(Clone)]
pub struct RemotePolicy {
    inner: Arc<Inner>,
}

struct Inner {
    client: reqwest::blocking::Client,
    config: RemoteConfig,
    gate: Arc<Gate>,
}

#[derive(Default)]
struct Request<'a> {
    mode: Option<Mode>,
    task: Option<&'a TaskSpec>,
    state: Option<StateFingerprint>,
    observation: Option<&'a Observation>,
    available: Option<&'a [ActionSpec]>,
    plan: Option<&'a Plan>,
    history: Option<&'a Trajectory>,
    failures: Option<&'a FailureLedger>,
    target: Option<StateFingerprint>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireSubtask {
    text: String,
    #[serde(default = "pending")]
    status: SubtaskStatus,
}

fn pending() -> SubtaskStatus {
    SubtaskStatus::Pending
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WirePlan {
    subtasks: Vec<WireSubtask>,
    #[serde(default)]
    revision: u64,
}

impl WirePlan {
    fn into_plan(self) -> Plan {
        Plan {
            subtasks: self
                .subtasks
                .into_iter()
                .map(|s| Subtask {
                    text: s.text,
                    status: s.status,
                })
                .collect(),
            revision: self.revision,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanResponse {
    version: Option<String>,
    plan: WirePlan,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ActResponse {
    version: Option<String>,
    action: ActionSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BacktrackResponse {
    version: Option<String>,
    backtrack: BacktrackAct,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackResponse {
    version: Option<String>,
    plan: WirePlan,
    status: ExecStatus,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyResponse {
    version: Option<String>,
    back_status: BackStatus,
}

/// Byte offset of a serde_json error position within `body`.
fn byte_offset(body: &str, err: &serde_json::Error) -> usize {
    if err.line() == 0 {
        return 0;
    }
    let prefix: usize = body.split_inclusive('\n').take(err.line() - 1).map(str::len).sum();
    (prefix + err.column()).min(body.len())
}

fn check_version(version: Option<&str>) -> Result<(), PolicyError> {
    match version {
        None | Some(WIRE_VERSION) => Ok(()),
        Some(other) => Err(PolicyError::PolicyProtocolError {
            offset: 0,
            message: format!("unsupported version {other:?}"),
        }),
    }
}

fn tail_json(steps: &[TrajectoryStep]) -> Value {
    serde_json::to_value(steps).unwrap_or(Value::Null)
}

impl RemotePolicy {
    pub fn new(config: RemoteConfig) -> Result<Self, PolicyError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| PolicyError::Transport(e.to_string()))?;
        let gate = gate_for(&config);
        Ok(RemotePolicy {
            inner: Arc::new(Inner { client, config, gate }),
        })
    }

    pub fn policy_set(&self) -> PolicySet {
        PolicySet {
            planner: Box::new(self.clone()),
            executor: Box::new(self.clone()),
            tracker: Box::new(self.clone()),
        }
    }

    fn body(role: Role, req: &Request<'_>) -> String {
        let failures: Vec<Value> = req
            .failures
            .map(|f| {
                f.failed_edges()
                    .map(|e| json!({"state": e.state, "action": e.action}))
                    .collect()
            })
            .unwrap_or_default();
        let value = json!({
            "version": WIRE_VERSION,
            "role": role,
            "mode": req.mode.unwrap_or(Mode::Normal),
            "task": req.task.map(|t| t.description.as_str()),
            "state": req.state,
            "observation": req.observation,
            "available": req.available,
            "plan": req.plan,
            "trajectory_tail": req.history.map(|h| tail_json(h.tail(TRAJECTORY_TAIL))).unwrap_or(Value::Array(vec![])),
            "failures": failures,
            "target": req.target,
        });
        canonical_json(&value)
    }

    fn call<T: DeserializeOwned>(&self, role: Role, req: &Request<'_>) -> Result<T, PolicyError> {
        let body = Self::body(role, req);
        let inner = &self.inner;
        let response = {
            let _permit = inner.gate.acquire();
            inner
                .client
                .post(inner.config.url())
                .header(reqwest::header::CONTENT_TYPE, "application/json")
                .body(body)
                .send()
                .and_then(|r| {
                    let status = r.status();
                    r.text().map(|text| (status, text))
                })
        };
        let (status, text) = response.map_err(|e| {
            if e.is_timeout() {
                PolicyError::PolicyTimeout {
                    role: role.name().to_string(),
                    after_ms: inner.config.timeout.as_millis() as u64,
                }
            } else {
                PolicyError::Transport(e.to_string())
            }
        })?;
        if !status.is_success() {
            let mut body = text;
            body.truncate(512);
            return Err(PolicyError::PolicyEndpointError {
                status: status.as_u16(),
                body,
            });
        }
        serde_json::from_str(&text).map_err(|e| PolicyError::PolicyProtocolError {
            offset: byte_offset(&text, &e),
            message: e.to_string(),
        })
    }
}

impl Planner for RemotePolicy {
    fn plan(&self, s: &StateView<'_>, task: &TaskSpec, failures: &FailureLedger) -> Result<Plan, PolicyError> {
        let req = Request {
            task: Some(task),
            state: Some(s.fingerprint),
            observation: Some(s.observation),
            available: Some(s.available),
            failures: Some(failures),
            ..Default::default()
        };
        let resp: PlanResponse = self.call(Role::Planner, &req)?;
        check_version(resp.version.as_deref())?;
        let plan = resp.plan.into_plan();
        plan.validate().map_err(|e| PolicyError::PolicyProtocolError {
            offset: 0,
            message: e.to_string(),
        })?;
        // A fresh plan starts with every subtask pending at revision 0.
        Plan::new(plan.subtasks.into_iter().map(|s| s.text)).map_err(|e| PolicyError::Contract(e.to_string()))
    }
}

impl Executor for RemotePolicy {
    fn act(&self, s: &StateView<'_>, task: &TaskSpec, plan: &Plan, history: &Trajectory) -> Result<ActionSpec, PolicyError> {
        let req = Request {
            task: Some(task),
            state: Some(s.fingerprint),
            observation: Some(s.observation),
            available: Some(s.available),
            plan: Some(plan),
            history: Some(history),
            ..Default::default()
        };
        let resp: ActResponse = self.call(Role::Executor, &req)?;
        check_version(resp.version.as_deref())?;
        Ok(resp.action)
    }

    fn backtrack_act(&self, history: &Trajectory, target: &StateFingerprint) -> Result<BacktrackAct, PolicyError> {
        let req = Request {
            mode: Some(Mode::Backtrack),
            state: history.last().map(|s| s.to),
            history: Some(history),
            target: Some(*target),
            ..Default::default()
        };
        let resp: BacktrackResponse = self.call(Role::Executor, &req)?;
        check_version(resp.version.as_deref())?;
        Ok(resp.backtrack)
    }
}

impl Tracker for RemotePolicy {
    fn track(
        &self,
        s: &StateView<'_>,
        task: &TaskSpec,
        plan: &Plan,
        history: &Trajectory,
        failures: &FailureLedger,
    ) -> Result<(Plan, ExecStatus), PolicyError> {
        let req = Request {
            task: Some(task),
            state: Some(s.fingerprint),
            observation: Some(s.observation),
            available: Some(s.available),
            plan: Some(plan),
            history: Some(history),
            failures: Some(failures),
            ..Default::default()
        };
        let resp: TrackResponse = self.call(Role::Tracker, &req)?;
        check_version(resp.version.as_deref())?;
        let mut proposed = resp.plan.into_plan();
        proposed.revision = plan.revision;
        Ok((proposed, resp.status))
    }

    fn verify_backtrack(
        &self,
        s: &StateView<'_>,
        target: &StateFingerprint,
        history: &Trajectory,
    ) -> Result<BackStatus, PolicyError> {
        let req = Request {
            mode: Some(Mode::Backtrack),
            state: Some(s.fingerprint),
            observation: Some(s.observation),
            available: Some(s.available),
            history: Some(history),
            target: Some(*target),
            ..Default::default()
        };
        let resp: VerifyResponse = self.call(Role::Tracker, &req)?;
        check_version(resp.version.as_deref())?;
        Ok(resp.back_status)
    }
}
