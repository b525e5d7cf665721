use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

/// Record of one invocation, written as `manifest.json`.
#[derive(Serialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: &'static str,
    pub flags: Value,
    pub seed: Option<u64>,
    pub seed_was_drawn: bool,
    pub threads: Option<usize>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_clock_seconds: f64,
    #[serde(skip)]
    started: Option<Instant>,
}

impl Manifest {
    pub fn new(command: &str, flags: Value, threads: Option<usize>) -> Self {
        Manifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            flags,
            seed: None,
            seed_was_drawn: false,
            threads,
            inputs: Vec::new(),
            outputs: Vec::new(),
            status: "running".into(),
            error: None,
            wall_clock_seconds: 0.0,
            started: Some(Instant::now()),
        }
    }

    /// Finalizes and writes `dir/manifest.json`.
    pub fn finish(&mut self, dir: &Path, outcome: &anyhow::Result<()>) -> anyhow::Result<()> {
        self.wall_clock_seconds = self.started.map_or(0.0, |t| t.elapsed().as_secs_f64());
        match outcome {
            Ok(()) => self.status = "ok".into(),
            Err(e) => {
                self.status = "error".into();
                self.error = Some(format!("{e:#}"));
            }
        }
        let path = dir.join("manifest.json");
        std::fs::create_dir_all(dir)?;
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
