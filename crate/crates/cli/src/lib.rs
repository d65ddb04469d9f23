//! Pipelines behind the `tandem` binary: simulate, ingest, optimize, analyze
//! and report. Each command writes JSON reports that embed a [`RunManifest`].

pub mod analyze;
mod commands;
pub mod fused_csv;
pub mod manifest;

use std::fs;
use std::path::Path;

use serde::Serialize;
use tandem_core::fusion::FusionError;
use tandem_core::sim::SimError;
use tandem_core::study_data::StudyError;
use thiserror::Error;

pub use analyze::{cmd_analyze, AnalyzeOptions};
pub use commands::{
    cmd_ingest, cmd_optimize, cmd_report, cmd_simulate, deployed_params, IngestInputs, SimulateSource, INGEST_FILE,
    MANIFEST_FILE, NESTED_CV_FILE, REPORT_FILE,
};
pub use fused_csv::FUSED_OUTCOMES_FILE;
pub use manifest::{Clock, RunContext, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Io(_) => EXIT_IO,
        }
    }

    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    /// JSON parse failures carry the line and column of the problem.
    pub(crate) fn json(path: &Path, e: &serde_json::Error) -> Self {
        CliError::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
    }
}

impl From<StudyError> for CliError {
    fn from(e: StudyError) -> Self {
        match e {
            StudyError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Study(s) => s.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<FusionError> for CliError {
    fn from(e: FusionError) -> Self {
        match e {
            FusionError::RangeViolation { .. } | FusionError::InvalidConfig(_) => CliError::Config(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// A report body with its manifest under the `manifest` key.
#[derive(Serialize)]
pub(crate) struct Envelope<'a, T: Serialize> {
    pub manifest: &'a RunManifest,
    #[serde(flatten)]
    pub body: &'a T,
}
