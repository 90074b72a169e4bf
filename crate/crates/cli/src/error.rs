//! Failure classes and the machine-readable error record.

use serde::Serialize;

use crate::checks::Check;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("I/O failure: {0}")]
    Io(String),

    #[error("{} of {} checks failed", failed_count(.0), .0.len())]
    CheckFailed(Vec<Check>),

    #[error("computation failed: {0}")]
    Computation(String),
}

fn failed_count(checks: &[Check]) -> usize {
    checks.iter().filter(|c| !c.passed).count()
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::InvalidSpec(_) => "invalid_spec",
            CliError::Io(_) => "io",
            CliError::CheckFailed(_) => "check_failed",
            CliError::Computation(_) => "computation",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Computation(_) => 1,
            CliError::InvalidSpec(_) => 2,
            CliError::Io(_) => 3,
            CliError::CheckFailed(_) => 4,
        }
    }

    pub fn record(&self) -> ErrorRecord<'_> {
        ErrorRecord {
            error: ErrorBody {
                kind: self.kind(),
                message: self.to_string(),
                exit_code: self.exit_code(),
                checks: match self {
                    CliError::CheckFailed(c) => Some(c),
                    _ => None,
                },
            },
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorRecord<'a> {
    pub error: ErrorBody<'a>,
}

#[derive(Debug, Serialize)]
pub struct ErrorBody<'a> {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<&'a [Check]>,
}

impl From<ddsound::Error> for CliError {
    fn from(e: ddsound::Error) -> Self {
        use ddsound::Error as E;
        match e {
            E::Io(_) | E::Format(_) | E::Truncated { .. } | E::Csv(_) => CliError::Io(e.to_string()),
            E::InvalidFrame(_)
            | E::GuardOverflow { .. }
            | E::InvalidPn(_)
            | E::InvalidPath(_)
            | E::LengthMismatch(_)
            | E::InvalidArgument(_)
            | E::Json(_) => CliError::InvalidSpec(e.to_string()),
            _ => CliError::Computation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
