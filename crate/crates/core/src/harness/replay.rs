//! Re-execute logged episodes and check every recorded fingerprint.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::orchestrator::LogLine;
use crate::sim_env::{Environment, SimEnv, WorldSpec};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    /// 1-based position of the offending line in the log.
    pub line: usize,
    pub episode_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub episodes: usize,
    pub lines: usize,
    /// First divergence found, if any.
    pub divergence: Option<Divergence>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.divergence.is_none()
    }
}

/// Digest field of an episode id (`variant/class/digest`).
pub fn digest_of(episode_id: &str) -> &str {
    episode_id.rsplit('/').next().unwrap_or("")
}

/// Replay `lines`. `resolve` maps a world digest to its world; the world's
/// own digest must match or the replay stops with `ReplayWorldMismatch`.
pub fn replay(
    lines: &[LogLine],
    mut resolve: impl FnMut(&str) -> Option<Arc<WorldSpec>>,
) -> Result<ReplayReport, HarnessError> {
    let mut report = ReplayReport {
        episodes: 0,
        lines: lines.len(),
        divergence: None,
    };
    let mut start = 0;
    while start < lines.len() {
        let id = &lines[start].episode_id;
        let end = lines[start..]
            .iter()
            .position(|l| l.episode_id != *id)
            .map_or(lines.len(), |n| start + n);
        report.episodes += 1;
        let digest = digest_of(id);
        let world = resolve(digest).ok_or_else(|| HarnessError::ReplayWorldMismatch {
            episode_id: id.clone(),
            reason: "world not found".to_string(),
        })?;
        if world.digest() != digest {
            return Err(HarnessError::ReplayWorldMismatch {
                episode_id: id.clone(),
                reason: format!("world digest is {}", world.digest()),
            });
        }
        if let Some(reason) = replay_episode(&world, &lines[start..end]).err() {
            report.divergence = Some(Divergence {
                line: start + reason.0 + 1,
                episode_id: id.clone(),
                reason: reason.1,
            });
            return Ok(report);
        }
        start = end;
    }
    Ok(report)
}

fn replay_episode(world: &Arc<WorldSpec>, lines: &[LogLine]) -> Result<(), (usize, String)> {
    let mut env = SimEnv::new(world.clone());
    env.reset();
    let mut seen = BTreeMap::new();
    seen.insert(env.fingerprint(), env.checkpoint());
    for (i, line) in lines.iter().enumerate() {
        let fail = |reason: String| Err((i, reason));
        if line.step != i as u64 {
            return fail(format!("step {} out of sequence, expected {i}", line.step));
        }
        if line.state_from != env.fingerprint() {
            return fail(format!("state_from {} but replay is at {}", line.state_from, env.fingerprint()));
        }
        if i + 1 == lines.len() {
            if line.action.is_some() || line.state_to != line.state_from {
                return fail("last line is not a verdict line".to_string());
            }
            return Ok(());
        }
        let outcome = match &line.action {
            None => match seen.get(&line.state_to) {
                Some(token) => env.restore(*token),
                None => return fail(format!("restore to unvisited state {}", line.state_to)),
            },
            Some(action) => env.step(action),
        };
        if let Err(e) = outcome {
            return fail(e.to_string());
        }
        let here = env.fingerprint();
        if here != line.state_to {
            return fail(format!("state_to {} but replay reached {here}", line.state_to));
        }
        seen.entry(here).or_insert_with(|| {
            
            env.checkpoint()
        });
    }
    Err((lines.len().saturating_sub(1), "episode has no verdict line".to_string()))
}
