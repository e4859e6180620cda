//! Tracker verdicts.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Global execution status reported by the tracker in normal mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExecStatus {
    Continue,
    Backtrack,
    Fail,
    Done,
}

/// Outcome of a backtracking attempt, reported by the tracker in backtrack mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BackStatus {
    Recovered,
    NotRecovered,
}

impl fmt::Display for ExecStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExecStatus::Continue => "CONTINUE",
            ExecStatus::Backtrack => "BACKTRACK",
            ExecStatus::Fail => "FAIL",
            ExecStatus::Done => "DONE",
        })
    }
}

impl fmt::Display for BackStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackStatus::Recovered => "RECOVERED",
            BackStatus::NotRecovered => "NOT_RECOVERED",
        })
    }
}
