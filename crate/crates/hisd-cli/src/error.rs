//! CLI error taxonomy with the exit-code contract:
//! 0 = success, 1 = validation error, 2 = numerical failure (a runtime
//! guard tripped), 3 = I/O error.

use hisd_core::{HarnessError, StepError};
use serde::Serialize;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(NumericalRecord),
    Io(String),
}

/// Machine-readable record emitted on stdout when a guard trips.
#[derive(Debug, Serialize)]
pub struct NumericalRecord {
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    pub message: String,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    /// Writes the human-readable message to stderr and, for numerical
    /// failures, the machine-readable record to stdout.
    pub fn report(&self) {
        match self {
            CliError::Validation(msg) => eprintln!("error: {msg}"),
            CliError::Io(msg) => eprintln!("error: {msg}"),
            CliError::Numerical(record) => {
                println!(
                    "{}",
                    serde_json::to_string(record).expect("error record serializes")
                );
                eprintln!("error: {}", record.message);
            }
        }
    }
}

pub fn step_error_kind(err: &StepError) -> &'static str {
    match err {
        StepError::Linear(_) => "SingularMatrix",
        StepError::StepTooLarge { .. } => "StepTooLarge",
        StepError::ZeroVector { .. } => "ZeroVector",
        StepError::DegenerateDirection { .. } => "DegenerateDirection",
    }
}

impl From<HarnessError> for CliError {
    fn from(err: HarnessError) -> Self {
        match err {
            HarnessError::Step { step, time, source } => CliError::Numerical(NumericalRecord {
                error: step_error_kind(&source).to_string(),
                step: Some(step),
                time: Some(time),
                message: format!("step {step} failed at t = {time}: {source}"),
            }),
            HarnessError::InvalidGrid(msg) | HarnessError::GridMismatch(msg) => {
                CliError::Validation(msg)
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}
