use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// One inequality from an admissibility or precondition block, evaluated.
///
/// `holds` is `lhs <= rhs`; `slack` is `rhs - lhs` so a negative slack says
/// by how much the condition is missed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub slack: f64,
}

impl Condition {
    pub fn le(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            holds: lhs <= rhs,
            slack: rhs - lhs,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {:.6e} <= {:.6e} ({}, slack {:.3e})",
            self.name,
            self.lhs,
            self.rhs,
            if self.holds { "ok" } else { "FAILED" },
            self.slack
        )
    }
}

/// Failed conditions, listed for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnosis(pub Vec<Condition>);

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("delta = {delta} outside the admissible range ({lo}, {hi}) for {context}")]
    DeltaOutOfRange {
        delta: f64,
        lo: f64,
        hi: f64,
        context: &'static str,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("value {value} outside the attainable range ({lo}, {hi})")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("preconditions not met: {0}")]
    Precondition(Diagnosis),

    #[error("problem too large for the brute-force oracle: n = {n} (max {max})")]
    OracleTooLarge { n: usize, max: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that come from a violated mathematical precondition
    /// (delta range, admissibility) rather than malformed input.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::DeltaOutOfRange { .. } | Error::Precondition(_) | Error::OutOfRange { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
