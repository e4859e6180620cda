//! Action vocabulary: click, drag, scroll, type, plus the backtrack-only inverse.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Kind of a primitive interaction. The declaration order is the canonical rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Click,
    Drag,
    Scroll,
    Type,
    Inverse,
}

impl ActionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Click => "Click",
            ActionKind::Drag => "Drag",
            ActionKind::Scroll => "Scroll",
            ActionKind::Type => "Type",
            ActionKind::Inverse => "Inverse",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionError {
    #[error("{0:?} requires a nonempty target")]
    MissingTarget(ActionKind),
    #[error("{0:?} does not accept a payload")]
    UnexpectedPayload(ActionKind),
    #[error("Type requires a payload")]
    MissingPayload,
    #[error("{0:?} does not accept a target")]
    UnexpectedTarget(ActionKind),
    #[error("Inverse requires inverse_of")]
    MissingInverseOf,
    #[error("{0:?} does not accept inverse_of")]
    UnexpectedInverseOf(ActionKind),
    #[error("cannot parse action from {0:?}")]
    Parse(String),
}

/// One operation executable in a state.
///
/// Which optional fields are populated is determined by `kind`:
/// Click/Drag/Scroll carry a target, Type carries a payload and optionally a
/// target, Inverse carries only `inverse_of` (the step index it undoes).
///
/// Ordering is canonical: kind rank, then target, then payload.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawAction")]
pub struct ActionSpec {
    // Fields are declared alphabetically so the serialized object is key-sorted.
    #[serde(skip_serializing_if = "Option::is_none")]
    inverse_of: Option<u64>,
    kind: ActionKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    payload: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAction {
    kind: ActionKind,
    #[serde(default)]
    target: Option<String>,
    #[serde(default)]
    payload: Option<String>,
    #[serde(default)]
    inverse_of: Option<u64>,
}

impl TryFrom<RawAction> for ActionSpec {
    type Error = ActionError;

    fn try_from(raw: RawAction) -> Result<Self, Self::Error> {
        ActionSpec::new(raw.kind, raw.target, raw.payload, raw.inverse_of)
    }
}

impl ActionSpec {
    pub fn new(
        kind: ActionKind,
        target: Option<String>,
        payload: Option<String>,
        inverse_of: Option<u64>,
    ) -> Result<Self, ActionError> {
        match kind {
            ActionKind::Click | ActionKind::Drag | ActionKind::Scroll => {
                if target.as_deref().is_none_or(str::is_empty) {
                    return Err(ActionError::MissingTarget(kind));
                }
                if payload.is_some() {
                    return Err(ActionError::UnexpectedPayload(kind));
                }
                if inverse_of.is_some() {
                    return Err(ActionError::UnexpectedInverseOf(kind));
                }
            }
            ActionKind::Type => {
                if payload.is_none() {
                    return Err(ActionError::MissingPayload);
                }
                if target.as_deref() == Some("") {
                    return Err(ActionError::MissingTarget(kind));
                }
                if inverse_of.is_some() {
                    return Err(ActionError::UnexpectedInverseOf(kind));
                }
            }
            ActionKind::Inverse => {
                if inverse_of.is_none() {
                    return Err(ActionError::MissingInverseOf);
                }
                if target.is_some() {
                    return Err(ActionError::UnexpectedTarget(kind));
                }
                if payload.is_some() {
                    return Err(ActionError::UnexpectedPayload(kind));
                }
            }
        }
        Ok(ActionSpec {
            inverse_of,
            kind,
            payload,
            target,
        })
    }

    pub fn click(target: impl Into<String>) -> Self {
        Self::new(ActionKind::Click, Some(target.into()), None, None).expect("click target must be nonempty")
    }

    pub fn drag(target: impl Into<String>) -> Self {
        Self::new(ActionKind::Drag, Some(target.into()), None, None).expect("drag target must be nonempty")
    }

    pub fn scroll(target: impl Into<String>) -> Self {
        Self::new(ActionKind::Scroll, Some(target.into()), None, None).expect("scroll target must be nonempty")
    }

    pub fn type_text(target: Option<String>, payload: impl Into<String>) -> Self {
        Self::new(ActionKind::Type, target, Some(payload.into()), None).expect("type target must be nonempty if present")
    }

    pub fn inverse(step: u64) -> Self {
        ActionSpec {
            inverse_of: Some(step),
            kind: ActionKind::Inverse,
            payload: None,
            target: None,
        }
    }

    pub fn kind(&self) -> ActionKind {
        self.kind
    }

    pub fn target(&self) -> Option<&str> {
        self.target.as_deref()
    }

    pub fn payload(&self) -> Option<&str> {
        self.payload.as_deref()
    }

    pub fn inverse_of(&self) -> Option<u64> {
        self.inverse_of
    }

    pub fn is_inverse(&self) -> bool {
        self.kind == ActionKind::Inverse
    }
}

impl Ord for ActionSpec {
    fn cmp(&self, other: &Self) -> Ordering {
        self.kind
            .cmp(&other.kind)
            .then_with(|| self.target.cmp(&other.target))
            .then_with(|| self.payload.cmp(&other.payload))
            .then_with(|| self.inverse_of.cmp(&other.inverse_of))
    }
}

impl PartialOrd for ActionSpec {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Compact text form: `Click#b1`, `Type#f2:"hello"`, `Type:"x"`, `Inverse@7`.
impl fmt::Display for ActionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.as_str())?;
        if let Some(step) = self.inverse_of {
            return write!(f, "@{step}");
        }
        if let Some(target) = &self.target {
            write!(f, "#{target}")?;
        }
        if let Some(payload) = &self.payload {
            let quoted = serde_json::to_string(payload).map_err(|_| fmt::Error)?;
            write!(f, ":{quoted}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for ActionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for ActionSpec {
    type Err = ActionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ActionError::Parse(s.to_string());
        let kind_end = s.find(['#', ':', '@']).unwrap_or(s.len());
        let kind = match &s[..kind_end] {
            "Click" => ActionKind::Click,
            "Drag" => ActionKind::Drag,
            "Scroll" => ActionKind::Scroll,
            "Type" => ActionKind::Type,
            "Inverse" => ActionKind::Inverse,
            _ => return Err(err()),
        };
        let rest = &s[kind_end..];
        if kind == ActionKind::Inverse {
            let step = rest.strip_prefix('@').ok_or_else(err)?;
            let step = step.parse::<u64>().map_err(|_| err())?;
            return Ok(ActionSpec::inverse(step));
        }
        let (target, payload) = match rest.strip_prefix('#') {
            Some(after) => match after.find(':') {
                Some(colon) => (Some(after[..colon].to_string()), Some(&after[colon + 1..])),
                None => (Some(after.to_string()), None),
            },
            None => (None, rest.strip_prefix(':')),
        };
        if rest.is_empty() || (target.is_none() && payload.is_none()) {
            return Err(err());
        }
        let payload = match payload {
            Some(quoted) => Some(serde_json::from_str::<String>(quoted).map_err(|_| err())?),
            None => None,
        };
        ActionSpec::new(kind, target, payload, None)
    }
}
