//! Run manifests: a snapshot of the normalized configuration, the derived
//! seeds, and content digests of every emitted file. Re-running from a
//! manifest reproduces all outputs bitwise (given the same build), at any
//! worker count.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub derived_seeds: Vec<u64>,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputRecord>,
    /// Per-seed failures (index, message); the run continues past them.
    pub seed_errors: Vec<(usize, String)>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    Ok(out)
}

impl RunManifest {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        RunManifest {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
            config_hash: config.config_hash(),
            derived_seeds: Vec::new(),
            wall_clock_seconds: 0.0,
            outputs: Vec::new(),
            seed_errors: Vec::new(),
        }
    }

    /// Register an emitted file, digesting its current content.
    pub fn record_output(&mut self, dir: &Path, name: &str) -> Result<()> {
        let full = dir.join(name);
        self.outputs.push(OutputRecord {
            path: name.to_string(),
            sha256: sha256_file(&full)?,
        });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let m: RunManifest = serde_json::from_str(&text).map_err(|e| Error::Config {
            key: "manifest".into(),
            message: format!("{path:?} is not a run manifest: {e}"),
        })?;
        Ok(m)
    }

    /// Verify that the recorded digests match the files on disk.
    pub fn verify_outputs(&self, dir: &Path) -> Result<Vec<String>> {
        let mut mismatches = Vec::new();
        for rec in &self.outputs {
            let actual = sha256_file(&dir.join(&rec.path))?;
            if actual != rec.sha256 {
                mismatches.push(rec.path.clone());
            }
        }
        Ok(mismatches)
    }
}
