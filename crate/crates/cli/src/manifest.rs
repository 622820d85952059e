use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;

use crate::error::{io_err, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Record of one run, written once into its output directory.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub version: &'static str,
    /// Fully resolved configuration, defaults included.
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub started_at: String,
    pub finished_at: String,
}

fn stamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub struct Run {
    subcommand: &'static str,
    started: DateTime<Utc>,
    out_dir: PathBuf,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn start(subcommand: &'static str, out_dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
        Ok(Self {
            subcommand,
            started: Utc::now(),
            out_dir: out_dir.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Writes `bytes` to `name` inside the output directory.
    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> CliResult<PathBuf> {
        let path = self.path(name);
        std::fs::write(&path, bytes).map_err(io_err(&path))?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    pub fn finish(
        self,
        config: serde_json::Value,
        inputs: Vec<PathBuf>,
        seed: Option<u64>,
    ) -> CliResult<()> {
        let manifest = RunManifest {
            subcommand: self.subcommand,
            version: env!("CARGO_PKG_VERSION"),
            config,
            inputs,
            outputs: self.outputs,
            seed,
            started_at: stamp(self.started),
            finished_at: stamp(Utc::now()),
        };
        let path = self.out_dir.join(MANIFEST_NAME);
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&path, json).map_err(io_err(&path))
    }
}
