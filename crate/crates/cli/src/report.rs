use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

pub const SCHEMA: u32 = 1;
pub const NOT_VERIFIED_GLOBAL: &str = "not verified — global";

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub status: String,
    pub worst_residual: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub wall_time: f64,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    /// Passes when `worst <= tolerance`.
    pub fn measured(name: &str, worst: f64, tolerance: f64, samples: usize, t: &Instant) -> Self {
        Check {
            name: name.into(),
            status: status(worst <= tolerance),
            worst_residual: worst,
            tolerance,
            samples,
            wall_time: t.elapsed().as_secs_f64(),
            detail: String::new(),
        }
    }

    /// A yes/no check, recorded with residual 0 or 1.
    pub fn flag(name: &str, ok: bool, samples: usize, t: &Instant) -> Self {
        Check {
            name: name.into(),
            status: status(ok),
            worst_residual: if ok { 0.0 } else { 1.0 },
            tolerance: 0.0,
            samples,
            wall_time: t.elapsed().as_secs_f64(),
            detail: String::new(),
        }
    }

    pub fn with_status(mut self, s: &str) -> Self {
        self.status = s.into();
        self
    }

    pub fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }

    pub fn failed(&self) -> bool {
        self.status == "fail"
    }
}

fn status(ok: bool) -> String {
    if ok { "pass" } else { "fail" }.into()
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema: u32,
    pub command: String,
    pub scenario: String,
    pub seed: Option<u64>,
    pub status: String,
    pub checks: Vec<Check>,
    pub data: Value,
}

impl Report {
    pub fn new(command: &str, scenario: &str, seed: Option<u64>, checks: Vec<Check>, data: Value) -> Self {
        let ok = !checks.iter().any(Check::failed);
        Report {
            schema: SCHEMA,
            command: command.into(),
            scenario: scenario.into(),
            seed,
            status: status(ok),
            checks,
            data,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == "pass"
    }

    pub fn checks_csv(&self) -> String {
        let mut s = String::from("name,status,worst_residual,tolerance,samples,wall_time\n");
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{},{:.6}",
                c.name, c.status, c.worst_residual, c.tolerance, c.samples, c.wall_time
            );
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let json = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        write_file(&dir.join("report.json"), &(json + "\n"))?;
        write_file(&dir.join("checks.csv"), &self.checks_csv())
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
