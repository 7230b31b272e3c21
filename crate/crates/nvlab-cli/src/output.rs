//! Artifact writing: JSON and CSV files in the output directory plus the
//! run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

/// Formats a CSV cell: shortest round-trip exponent form, or
/// "NA:NON_FINITE" for NaN and infinities.
pub fn num(x: f64) -> String {
    num_or(x, "NON_FINITE")
}

/// Formats a CSV cell, writing "NA:<reason>" when `x` is not finite.
pub fn num_or(x: f64, reason: &str) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        format!("NA:{reason}")
    }
}

/// Collects the artifacts of one run.
pub struct Outputs {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        fs::write(self.dir.join(name), serde_json::to_string_pretty(value)? + "\n")?;
        self.files.push(name.into());
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        fs::write(self.dir.join(name), body)?;
        self.files.push(name.into());
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        self.files.push(name.into());
        Ok(())
    }

    /// Registers a file written by other code.
    pub fn record(&mut self, name: String) {
        self.files.push(name);
    }
}

/// Everything needed to reproduce a run. Timestamps live only here.
#[derive(Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'a str,
    pub params: &'a Value,
    pub seed: u64,
    pub output_dir: String,
    pub threads_env: Option<String>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub outputs: &'a [String],
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}
