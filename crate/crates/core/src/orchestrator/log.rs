//! JSONL trajectory log: one line per environment interaction plus one
//! verdict line per episode.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::state_space::{ActionSpec, Mode, StateFingerprint};
use crate::status::{BackStatus, ExecStatus};

use super::{EpisodeResult, Outcome};

/// Field order is fixed; absent values serialize as `null`.
///
/// `action` is `null` for a checkpoint restore and on the final verdict line
/// of an episode, which has `state_from == state_to` and carries the
/// episode's terminal status (`DONE`, `FAIL`, or `null` when the budget ran
/// out).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogLine {
    pub episode_id: String,
    pub step: u64,
    pub mode: Mode,
    pub state_from: StateFingerprint,
    pub action: Option<ActionSpec>,
    pub state_to: StateFingerprint,
    pub exec_status: Option<ExecStatus>,
    pub back_status: Option<BackStatus>,
    pub plan_revision: u64,
}

pub fn log_lines(result: &EpisodeResult) -> Vec<LogLine> {
    let mut lines: Vec<LogLine> = result
        .trajectory
        .steps()
        .iter()
        .map(|s| LogLine {
            episode_id: result.episode_id.clone(),
            step: s.index,
            mode: s.mode,
            state_from: s.from,
            action: s.action.clone(),
            state_to: s.to,
            exec_status: s.exec_status,
            back_status: s.back_status,
            plan_revision: s.plan_revision,
        })
        .collect();
    lines.push(LogLine {
        episode_id: result.episode_id.clone(),
        step: result.trajectory.len() as u64,
        mode: result.final_mode,
        state_from: result.final_state,
        action: None,
        state_to: result.final_state,
        exec_status: match result.outcome {
            Outcome::Done => Some(ExecStatus::Done),
            Outcome::Fail => Some(ExecStatus::Fail),
            Outcome::BudgetExhausted => None,
        },
        back_status: None,
        plan_revision: result.final_plan.revision,
    });
    lines
}

pub fn write_jsonl<W: Write>(out: &mut W, result: &EpisodeResult) -> io::Result<()> {
    for line in log_lines(result) {
        serde_json::to_writer(&mut *out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Parse a JSONL log; errors name the 1-based line number.
pub fn parse_log(text: &str) -> Result<Vec<LogLine>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}
