//! Machine-readable run manifests: every subcommand records what it read
//! (with content hashes), what it wrote, the seed in effect and timings,
//! so a run can be audited and reproduced.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub threads: usize,
    pub started_unix: u64,
    pub elapsed_ms: u128,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
}

pub struct ManifestBuilder {
    command: String,
    seed: u64,
    threads: usize,
    started: Instant,
    started_unix: u64,
    inputs: Vec<InputRecord>,
    outputs: Vec<PathBuf>,
    notes: Vec<String>,
}

impl ManifestBuilder {
    pub fn new(command: &str, seed: u64, threads: usize) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            seed,
            threads,
            started: Instant::now(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Record an input file with its content hash.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        let digest = Sha256::digest(&bytes);
        self.inputs.push(InputRecord {
            path: path.display().to_string(),
            sha256: hex_string(&digest),
        });
        Ok(())
    }

    /// Record every regular file under a directory (sorted for stability).
    pub fn input_dir(&mut self, dir: &Path) -> Result<()> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
            .map(|e| e.path())
            .collect();
        files.sort();
        for f in files {
            self.input(&f)?;
        }
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn outputs(&mut self, paths: &[PathBuf]) {
        self.outputs.extend(paths.iter().cloned());
    }

    pub fn note(&mut self, text: String) {
        self.notes.push(text);
    }

    /// Write `run_manifest.json` into the given directory.
    pub fn finish(self, dir: &Path) -> Result<()> {
        let manifest = RunManifest {
            command: self.command,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            threads: self.threads,
            started_unix: self.started_unix,
            elapsed_ms: self.started.elapsed().as_millis(),
            inputs: self.inputs,
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
            notes: self.notes,
        };
        crate::formats::write_json(&dir.join("run_manifest.json"), &manifest)?;
        Ok(())
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
