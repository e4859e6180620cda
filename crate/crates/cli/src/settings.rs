//! Run settings merged from defaults, an optional TOML file and flags.

use std::path::Path;
use std::time::Duration;

use beap_core::harness::{PolicyChoice, SuiteConfig};
use beap_core::orchestrator::{BacktrackScope, EpisodeConfig};
use beap_core::policy::{RemoteConfig, ScriptedParams};
use serde::Deserialize;

pub const ENDPOINT_VAR: &str = "BEAP_POLICY_ENDPOINT";

/// Every knob of a suite run. Each field is optional so that a config file
/// and command-line flags can be layered.
#[derive(Debug, Clone, Default, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    /// Base seed for episodes and generated worlds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Environment-step budget per episode.
    #[arg(long)]
    pub max_steps: Option<u32>,
    /// Concurrent episodes.
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// oracle, scripted, blind or remote.
    #[arg(long)]
    pub policy: Option<String>,
    /// Base URL of a remote policy server.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Remote request timeout in seconds.
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_backtrack: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_tracker: Option<bool>,
    /// Backtrack only to the immediate parent.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub single_step: Option<bool>,
    #[arg(long)]
    pub max_backtrack_retries: Option<u32>,
    #[arg(long)]
    pub snapshot_window: Option<usize>,
    /// Allow reset-and-replay as the last recovery resort.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub reset_replay: Option<bool>,
    /// Scripted policy: fraction of the route the planner knows.
    #[arg(long)]
    pub knowledge: Option<f64>,
    /// Scripted policy: probability of taking a decoy branch.
    #[arg(long)]
    pub wrong_branch_bias: Option<f64>,
    /// Scripted policy: steps before a wrong branch is noticed.
    #[arg(long)]
    pub detection_depth: Option<u32>,
}

macro_rules! layer {
    ($self:ident, $other:ident, $($field:ident),*) => {
        $( if $other.$field.is_some() { $self.$field = $other.$field.clone(); } )*
    };
}

impl RunSettings {
    pub fn from_toml_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Fields set in `other` win.
    pub fn overlay(mut self, other: &RunSettings) -> Self {
        layer!(
            self, other, seed, max_steps, parallelism, policy, endpoint, timeout_secs, no_backtrack, no_tracker,
            single_step, max_backtrack_retries, snapshot_window, reset_replay, knowledge, wrong_branch_bias,
            detection_depth
        );
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn policy(&self, endpoint_env: Option<String>) -> Result<PolicyChoice, String> {
        let seed = self.seed();
        match self.policy.as_deref().unwrap_or("scripted") {
            "oracle" => Ok(PolicyChoice::Oracle),
            "blind" => Ok(PolicyChoice::Blind),
            "scripted" => {
                let defaults = ScriptedParams::default();
                let params = ScriptedParams {
                    knowledge: self.knowledge.unwrap_or(defaults.knowledge),
                    wrong_branch_bias: self.wrong_branch_bias.unwrap_or(defaults.wrong_branch_bias),
                    detection_depth: self.detection_depth,
                    seed,
                };
                params.validate()?;
                Ok(PolicyChoice::Scripted(params))
            }
            "remote" => {
                let endpoint = endpoint_env
                    .or_else(|| self.endpoint.clone())
                    .ok_or_else(|| format!("remote policy needs --endpoint or {ENDPOINT_VAR}"))?;
                let mut config = RemoteConfig::new(endpoint);
                if let Some(secs) = self.timeout_secs {
                    config.timeout = Duration::from_secs(secs);
                }
                Ok(PolicyChoice::Remote(config))
            }
            other => Err(format!("unknown policy {other:?} (expected oracle, scripted, blind or remote)")),
        }
    }

    /// Resolve into a suite configuration. `endpoint_env` takes precedence
    /// over any configured endpoint.
    pub fn suite_config(&self, variant: &str, endpoint_env: Option<String>) -> Result<SuiteConfig, String> {
        let defaults = EpisodeConfig::default();
        let mut episode = EpisodeConfig {
            max_steps: self.max_steps.unwrap_or(defaults.max_steps),
            max_backtrack_retries: self.max_backtrack_retries.unwrap_or(defaults.max_backtrack_retries),
            snapshot_window: self.snapshot_window.unwrap_or(defaults.snapshot_window),
            seed: self.seed(),
            backtrack_scope: if self.single_step.unwrap_or(false) {
                BacktrackScope::SingleStep
            } else {
                BacktrackScope::MultiLevel
            },
            reset_replay: self.reset_replay.unwrap_or(defaults.reset_replay),
            ..defaults
        };
        episode.ablation.enable_backtrack = !self.no_backtrack.unwrap_or(false);
        episode.ablation.enable_tracker = !self.no_tracker.unwrap_or(false);
        episode.validate().map_err(|e| e.to_string())?;
        let config = SuiteConfig {
            episode,
            policy: self.policy(endpoint_env)?,
            parallelism: self.parallelism.unwrap_or(1),
            variant: variant.to_string(),
        };
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }
}
