//! Run manifest: what was run, with which resolved configuration, and which
//! files it produced.

use std::fs;
use std::io;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub const FILE_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub experiment: String,
    pub config_path: Option<String>,
    pub output_dir: String,
    /// Seed of a single run, or seed base of a sweep or map.
    pub seed_base: u64,
    /// Requested worker threads (0 = all cores); does not affect results.
    pub threads: usize,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub aborted_runs: usize,
    /// Paths relative to the output directory, the manifest excluded.
    pub artifacts: Vec<String>,
    /// Feeding this back as `--config` reproduces the artifacts.
    pub resolved_config: String,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)
    }
}

pub fn unix_time() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
