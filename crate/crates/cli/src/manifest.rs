use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::failure::Failure;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub index: usize,
    pub task: String,
    pub outputs: Vec<String>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// Hex SHA-256 of the spec file bytes; absent if it could not be read.
    pub spec_sha256: Option<String>,
    pub seed: Option<u64>,
    pub threads: usize,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub status: Status,
    pub tasks: Vec<TaskRecord>,
    /// Files written besides task outputs.
    pub artifacts: Vec<String>,
    pub failure: Option<Failure>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self, Failure> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| {
            Failure::new(
                "cli.missing_manifest",
                format!("{}: {e}", path.display()),
            )
        })?;
        serde_json::from_str(&text).map_err(|e| {
            Failure::new(
                "cli.invalid_manifest",
                format!("{}: {e}", path.display()),
            )
        })
    }
}
