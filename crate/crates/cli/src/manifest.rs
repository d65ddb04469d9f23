use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use chrono::{DateTime, SecondsFormat};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Timestamp source for manifests. `Fixed` makes reruns byte-identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    System,
    Fixed(i64),
}

impl Clock {
    /// `SOURCE_DATE_EPOCH` when set and parseable, else the system clock.
    pub fn from_env() -> Self {
        std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .map_or(Clock::System, Clock::Fixed)
    }

    pub fn now(&self) -> String {
        let secs = match self {
            Clock::Fixed(s) => *s,
            Clock::System => SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs() as i64),
        };
        DateTime::from_timestamp(secs, 0)
            .unwrap_or_default()
            .to_rfc3339_opts(SecondsFormat::Secs, true)
    }
}

/// Settings shared by every command.
#[derive(Debug, Clone, Copy)]
pub struct RunContext {
    pub seed: u64,
    pub clock: Clock,
}

impl Default for RunContext {
    fn default() -> Self {
        Self { seed: 0, clock: Clock::System }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the canonical JSON of the effective configuration.
    pub config_sha256: String,
    /// Input file name to SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub(crate) fn start<C: Serialize>(command: &str, config: &C, seeds: Vec<u64>, clock: Clock) -> Self {
        let canonical = serde_json::to_vec(config).expect("configuration serializes");
        Self {
            command: command.to_string(),
            config_sha256: sha256_hex(&canonical),
            inputs: BTreeMap::new(),
            seeds,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: clock.now(),
            finished_at: String::new(),
        }
    }

    /// Record an input by file name. Missing optional files are skipped.
    pub(crate) fn add_input(&mut self, path: &Path) -> Result<(), CliError> {
        if !path.exists() {
            return Ok(());
        }
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        self.inputs.insert(name, sha256_hex(&bytes));
        Ok(())
    }

    pub(crate) fn finish(&mut self, clock: Clock) {
        self.finished_at = clock.now();
    }
}
