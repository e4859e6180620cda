//! Batch runner: one episode per world, optionally in parallel.

use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::orchestrator::{run_episode, EpisodeConfig, EpisodeResult, Outcome};
use crate::plan::Plan;
use crate::policy::{
    BlindExecutor, BlindPlanner, GoalOnlyTracker, OracleExecutor, OraclePlanner, OracleTracker, PolicySet,
    RemoteConfig, RemotePolicy, ScriptedExecutor, ScriptedParams, ScriptedPlanner, ScriptedTracker, TaskSpec,
    WorldKnowledge,
};
use crate::sim_env::{Environment, SimEnv};
use crate::state_space::{Mode, Trajectory};

use super::manifest::SuiteWorld;
use super::HarnessError;

/// Upper bound on worker threads.
pub const MAX_PARALLELISM: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyChoice {
    Oracle,
    Scripted(ScriptedParams),
    Blind,
    Remote(RemoteConfig),
}

impl PolicyChoice {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyChoice::Oracle => "oracle",
            PolicyChoice::Scripted(_) => "scripted",
            PolicyChoice::Blind => "blind",
            PolicyChoice::Remote(_) => "remote",
        }
    }

    pub fn build(&self, world: &SuiteWorld) -> Result<PolicySet, HarnessError> {
        let knowledge = || WorldKnowledge::new(world.spec.clone()).map_err(HarnessError::from);
        Ok(match self {
            PolicyChoice::Oracle => {
                let k = knowledge()?;
                PolicySet {
                    planner: Box::new(OraclePlanner::new(k.clone())),
                    executor: Box::new(OracleExecutor),
                    tracker: Box::new(OracleTracker::new(k)),
                }
            }
            PolicyChoice::Scripted(params) => {
                let k = knowledge()?;
                PolicySet {
                    planner: Box::new(ScriptedPlanner::new(k.clone(), params.clone())),
                    executor: Box::new(ScriptedExecutor::new(k.clone(), params.clone())),
                    tracker: Box::new(ScriptedTracker::new(k, params)),
                }
            }
            PolicyChoice::Blind => PolicySet {
                planner: Box::new(BlindPlanner),
                executor: Box::new(BlindExecutor),
                tracker: Box::new(GoalOnlyTracker::new(world.spec.clone())),
            },
            PolicyChoice::Remote(config) => RemotePolicy::new(config.clone())
                .map_err(|e| HarnessError::Config(e.to_string()))?
                .policy_set(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub episode: EpisodeConfig,
    pub policy: PolicyChoice,
    pub parallelism: usize,
    /// Prefix of every episode id, e.g. `full` or `no-tracker`.
    pub variant: String,
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.parallelism == 0 || self.parallelism > MAX_PARALLELISM {
            return Err(HarnessError::Config(format!(
                "parallelism must be between 1 and {MAX_PARALLELISM}"
            )));
        }
        self.episode.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if let PolicyChoice::Scripted(p) = &self.policy {
            p.validate().map_err(HarnessError::Config)?;
        }
        Ok(())
    }
}

pub fn episode_id(variant: &str, world: &SuiteWorld) -> String {
    format!("{variant}/{}/{}", world.class, world.digest)
}

/// Run one world; policy construction errors and panics become FAIL results.
pub fn run_world(world: &SuiteWorld, config: &SuiteConfig) -> EpisodeResult {
    let id = episode_id(&config.variant, world);
    let attempt = catch_unwind(AssertUnwindSafe(|| -> Result<EpisodeResult, HarnessError> {
        let policies = config.policy.build(world)?;
        let mut env = SimEnv::new(world.spec.clone());
        let task = TaskSpec {
            description: world.spec.task.clone(),
        };
        run_episode(&mut env, &policies, &task, &config.episode, id.clone())
            .map_err(|e| HarnessError::Config(e.to_string()))
    }));
    let diagnostic = match attempt {
        Ok(Ok(result)) => return result,
        Ok(Err(e)) => e.to_string(),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            format!("episode crashed: {msg}")
        }
    };
    ::log::warn!("{id}: {diagnostic}");
    let initial = SimEnv::new(world.spec.clone()).fingerprint();
    EpisodeResult {
        episode_id: id,
        outcome: Outcome::Fail,
        steps_used: 0,
        backtrack_attempts: 0,
        backtrack_successes: 0,
        backtrack_steps_total: 0,
        trajectory: Trajectory::new(),
        final_plan: Plan::default(),
        final_state: initial,
        final_mode: Mode::Normal,
        events: Vec::new(),
        diagnostic: Some(diagnostic),
    }
}

/// Run every world; results come back in world order whatever the
/// parallelism.
pub fn run_worlds(worlds: &[SuiteWorld], config: &SuiteConfig) -> Result<Vec<EpisodeResult>, HarnessError> {
    config.validate()?;
    if config.parallelism == 1 {
        return Ok(worlds.iter().map(|w| run_world(w, config)).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(pool.install(|| worlds.par_iter().map(|w| run_world(w, config)).collect()))
}
