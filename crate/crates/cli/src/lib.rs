//! Subcommands of the `camegrad` experiment runner.
//!
//! Every `cmd_*` function returns the text destined for stdout together with
//! an optional failure. Failures that still produce output (a diverged run,
//! an oracle gap) carry it in [`Outcome::failure`] so the caller can print
//! the report and then exit with the failure's code.

pub mod config;
pub mod diagnose;
pub mod error;
pub mod inspect;
pub mod run;

use std::path::Path;

pub use config::{Experiment, ExperimentConfig};
pub use diagnose::{cmd_diagnose, DiagnoseOptions};
pub use error::{CliError, Result};
pub use inspect::{
    cmd_oracle_check, cmd_oracle_check_file, cmd_rectify, cmd_step, oracle_check_instances,
    oracle_check_rows, OracleCheck, OracleRow,
};
pub use run::{cmd_sweep, cmd_train, RunSummary};

#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub failure: Option<CliError>,
}

impl Outcome {
    pub fn ok(stdout: String) -> Self {
        Self {
            stdout,
            failure: None,
        }
    }

    pub fn exit_code(&self) -> u8 {
        self.failure.as_ref().map_or(0, CliError::exit_code)
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub(crate) fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(camegrad::fmt::float).unwrap_or_default()
}
