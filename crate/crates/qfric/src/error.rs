use std::fmt;

use qfric_core::Error as CoreError;

/// Failure classes of a run, each with its process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    /// Malformed or inconsistent configuration (exit 2).
    Config(String),
    /// Non-convergence or a collapsed integrator (exit 3).
    Numerical(String),
    /// The truncation guard tripped or the cutoff cannot hold the state (exit 4).
    Truncation(String),
    /// Reading the config or writing outputs failed (exit 1).
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Io(_) => 1,
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Truncation(_) => 4,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "config error: {m}"),
            RunError::Numerical(m) => write!(f, "numerical failure: {m}"),
            RunError::Truncation(m) => write!(f, "truncation failure: {m}"),
            RunError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::TruncationTrip { .. } | CoreError::CutoffInsufficient { .. } | CoreError::NonFiniteProfile { .. } => {
                RunError::Truncation(msg)
            }
            CoreError::StepSizeCollapse { .. }
            | CoreError::NoConvergence { .. }
            | CoreError::NegativeSteadyState { .. }
            | CoreError::GridUnderresolved { .. } => RunError::Numerical(msg),
            _ => RunError::Config(msg),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(e.to_string())
    }
}
