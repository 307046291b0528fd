use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::FacilityConfig;
use crate::cooling::Temps;
use crate::error::{Error, Result};
use crate::milp::SolveOptions;
use crate::scenario::ScheduleSolution;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub status: String,
    pub total_cost_gbp: f64,
    pub main_day_cost_gbp: f64,
    pub objective_gbp: Option<f64>,
    pub mip_gap: Option<f64>,
    pub slots: usize,
}

impl ScenarioRecord {
    pub fn from_schedule(s: &ScheduleSolution) -> Self {
        Self {
            status: s.status.label().to_owned(),
            total_cost_gbp: s.total_cost_gbp,
            main_day_cost_gbp: s.main_day_cost_gbp,
            objective_gbp: s.objective_gbp,
            mip_gap: s.mip_gap,
            slots: s.len(),
        }
    }
}

/// Wall-clock data, the only part of a manifest allowed to differ between reruns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub created_unix_s: u64,
    pub solve_seconds: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_sha256: String,
    pub table_sha256: BTreeMap<String, String>,
    pub solver: String,
    pub solver_options: SolveOptions,
    pub pwl_segments: usize,
    pub pwl_max_abs_error_kw: f64,
    pub initial_temperatures_c: Option<Temps>,
    pub scenarios: BTreeMap<String, ScenarioRecord>,
    pub values: BTreeMap<String, f64>,
    pub files: Vec<String>,
    pub anomalies: Vec<String>,
    pub timing: Timing,
}

impl RunManifest {
    pub fn new(command: &str, cfg: &FacilityConfig, solver: &str, pwl_max_abs_error_kw: f64) -> Self {
        Self {
            command: command.to_owned(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            config_sha256: sha256_hex(cfg.to_toml_string().as_bytes()),
            table_sha256: BTreeMap::new(),
            solver: solver.to_owned(),
            solver_options: SolveOptions {
                time_limit_s: cfg.model.time_limit_s,
                mip_rel_gap: cfg.model.mip_rel_gap,
                ..SolveOptions::default()
            },
            pwl_segments: cfg.model.pwl_segments,
            pwl_max_abs_error_kw,
            initial_temperatures_c: None,
            scenarios: BTreeMap::new(),
            values: BTreeMap::new(),
            files: Vec::new(),
            anomalies: Vec::new(),
            timing: Timing {
                created_unix_s: std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map_or(0, |d| d.as_secs()),
                solve_seconds: BTreeMap::new(),
            },
        }
    }

    pub fn add_table(&mut self, name: &str, bytes: &[u8]) {
        self.table_sha256.insert(name.to_owned(), sha256_hex(bytes));
    }

    pub fn add_scenario(&mut self, name: &str, s: &ScheduleSolution) {
        self.scenarios.insert(name.to_owned(), ScenarioRecord::from_schedule(s));
        self.timing.solve_seconds.insert(name.to_owned(), s.solve_seconds);
    }

    /// The manifest with wall-clock data cleared, for rerun comparisons.
    pub fn without_timing(&self) -> Self {
        Self { timing: Timing::default(), ..self.clone() }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

/// Stores a schedule in full so later commands can reuse it as a baseline.
pub fn write_schedule_json(path: &Path, s: &ScheduleSolution) -> Result<()> {
    let text = serde_json::to_string(s).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_schedule_json(path: &Path) -> Result<ScheduleSolution> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}
