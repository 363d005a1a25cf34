//! Versioned JSON run reports. Every check row names its identity anchor
//! tag and carries the measured value against the pinned tolerance, so a
//! report is a self-contained verification record.

use serde::Serialize;
use std::path::Path;

pub const SCHEMA: &str = "gplab-report-1";

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub wall_seconds: f64,
    pub config: String,
    pub checks: Vec<CheckRow>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct CheckRow {
    pub name: String,
    /// Identity anchor tag of the checked statement.
    pub anchor: String,
    pub measured: f64,
    pub tolerance: f64,
    /// Comparison direction: "<=" or ">=".
    pub comparison: &'static str,
    pub pass: bool,
}

impl CheckRow {
    pub fn upper(name: &str, anchor: &str, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            measured,
            tolerance,
            comparison: "<=",
            pass: measured <= tolerance,
        }
    }

    pub fn lower(name: &str, anchor: &str, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            measured,
            tolerance,
            comparison: ">=",
            pass: measured >= tolerance,
        }
    }
}

pub struct ReportBuilder {
    command: String,
    seed: u64,
    config: String,
    started: std::time::Instant,
    checks: Vec<CheckRow>,
    warnings: Vec<String>,
    artifacts: Vec<String>,
}

impl ReportBuilder {
    pub fn new(command: &str, seed: u64, config_echo: String) -> Self {
        Self {
            command: command.into(),
            seed,
            config: config_echo,
            started: std::time::Instant::now(),
            checks: Vec::new(),
            warnings: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn check(&mut self, row: CheckRow) {
        self.checks.push(row);
    }

    pub fn warn(&mut self, message: String) {
        self.warnings.push(message);
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.display().to_string());
    }

    pub fn finish(self) -> RunReport {
        let pass = self.checks.iter().all(|c| c.pass);
        RunReport {
            schema: SCHEMA,
            command: self.command,
            version: format!("gplab {}", env!("CARGO_PKG_VERSION")),
            seed: self.seed,
            wall_seconds: self.started.elapsed().as_secs_f64(),
            config: self.config,
            checks: self.checks,
            warnings: self.warnings,
            artifacts: self.artifacts,
            pass,
        }
    }
}

pub fn write_report(report: &RunReport, dir: &Path) -> anyhow::Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("report.json");
    std::fs::write(&path, serde_json::to_string_pretty(report)?)?;
    Ok(path)
}
