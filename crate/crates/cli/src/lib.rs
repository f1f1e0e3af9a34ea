//! Command-line front end: existence checks, certificate design, closed-loop
//! simulation, bound verification and the bundled case studies.
//!
//! Exit codes: 0 success, 1 input or I/O error, 2 existence, feasibility or
//! bound failure, 3 divergence.

pub mod commands;
pub mod pispec;
mod plot;
pub mod presets;

use std::fmt;

pub use commands::{run, Cli, Command};

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn failed(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    /// Prefixes the message with the pipeline stage that produced it.
    pub fn in_stage(mut self, stage: &str) -> Self {
        self.message = format!("stage {stage}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<dwellswitch::Error> for CliError {
    fn from(e: dwellswitch::Error) -> Self {
        use dwellswitch::Error as E;
        let code = match &e {
            E::ExistenceViolated(_) | E::Infeasible { .. } => 2,
            E::Divergence { .. } => 3,
            _ => 1,
        };
        let mut message = e.to_string();
        if let E::Infeasible { mode, .. } = &e {
            message = format!("{message} [failing mode {}]", mode + 1);
        }
        Self { code, message }
    }
}

/// Result of a command that ran to completion: its exit code and report.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: u8,
    pub report: String,
}

impl Outcome {
    pub fn ok(report: String) -> Self {
        Self { code: 0, report }
    }
}
