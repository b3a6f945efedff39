use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Outcome of one tool on one instance.
///
/// `Holds` means the counterexample specification was shown unsatisfiable,
/// `Violated` means a satisfying point exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Holds,
    Violated,
    Timeout,
    Error,
    Unknown,
}

impl Status {
    pub const ALL: [Status; 5] = [
        Status::Holds,
        Status::Violated,
        Status::Timeout,
        Status::Error,
        Status::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Holds => "holds",
            Status::Violated => "violated",
            Status::Timeout => "timeout",
            Status::Error => "error",
            Status::Unknown => "unknown",
        }
    }

    /// `Holds` or `Violated`.
    pub fn is_solved(self) -> bool {
        matches!(self, Status::Holds | Status::Violated)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unrecognized status token {0:?}")]
pub struct ParseStatusError(pub String);

impl FromStr for Status {
    type Err = ParseStatusError;

    /// Accepts the lowercase tokens plus the SMT-style `sat`/`unsat` aliases
    /// some tools print.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "holds" | "unsat" => Ok(Status::Holds),
            "violated" | "sat" => Ok(Status::Violated),
            "timeout" => Ok(Status::Timeout),
            "error" => Ok(Status::Error),
            "unknown" => Ok(Status::Unknown),
            _ => Err(ParseStatusError(s.to_string())),
        }
    }
}
