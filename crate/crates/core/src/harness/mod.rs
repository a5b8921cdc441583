//! Scenario files, output formats and the command implementations behind the CLI.

pub mod commands;
pub mod output;
pub mod scenario;
pub mod studies;

use thiserror::Error;

use crate::sim::SimError;

pub use commands::{analyze_scenario, cmd_analyze, cmd_run, cmd_sweep, run_scenario, sweep_scenario, RunOptions};
pub use output::{load_trajectory_csv, read_trajectory_csv, save_trajectory_csv, write_trajectory_csv, RunReport, CSV_COLUMNS};
pub use scenario::{load_scenario, parse_scenario, BoundsSpec, FieldSpec, Scenario, SweepSpec};
pub use studies::{cmd_reproduce, run_study, StudyOutcome, STUDIES};

pub const EXIT_OK: i32 = 0;
/// Malformed input, failed validation or unknown study.
pub const EXIT_INVALID: i32 = 1;
/// The simulation diverged or left the field domain.
pub const EXIT_RUNTIME: i32 = 2;
/// Stability conditions or study thresholds not met.
pub const EXIT_CONDITIONS: i32 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("{}", describe("parse error", path, line, message))]
    Parse { path: String, line: Option<usize>, message: String },
    #[error("{}", describe("invalid value", path, line, message))]
    Invalid { path: String, line: Option<usize>, message: String },
    #[error("io: {0}")]
    Io(String),
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("unknown study '{0}'")]
    UnknownStudy(String),
}

fn describe(kind: &str, path: &str, line: &Option<usize>, message: &str) -> String {
    let mut out = kind.to_string();
    if !path.is_empty() {
        out += &format!(" at `{path}`");
    }
    if let Some(l) = line {
        out += &format!(" (line {l})");
    }
    format!("{out}: {message}")
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Sim(SimError::InvalidConfig(_)) => EXIT_INVALID,
            Self::Sim(_) => EXIT_RUNTIME,
            _ => EXIT_INVALID,
        }
    }
}
