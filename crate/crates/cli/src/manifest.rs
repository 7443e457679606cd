//! Output bookkeeping: every artifact is written through [`Outputs`], which
//! records its SHA-256 for the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub verification: Option<bool>,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug)]
pub struct Outputs {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Outputs {
    /// Creates the output directory and checks that it is writable.
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::usage(format!("cannot create output directory {}: {e}", root.display())))?;
        let probe = root.join(".acbias-write-test");
        fs::write(&probe, b"")
            .map_err(|e| CliError::usage(format!("output directory {} is not writable: {e}", root.display())))?;
        let _ = fs::remove_file(probe);
        Ok(Self { root: root.to_path_buf(), artifacts: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `bytes` to `relative` under the root.
    pub fn write(&mut self, relative: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.artifacts.push(Artifact { path: relative.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    /// Renders through a writer-taking closure, then stores the bytes.
    pub fn write_with(
        &mut self,
        relative: &str,
        render: impl FnOnce(&mut Vec<u8>) -> acbias::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        render(&mut buf)?;
        self.write(relative, &buf)
    }

    pub fn artifacts(&self) -> &[Artifact] {
        &self.artifacts
    }

    /// Writes `manifest.json` with artifacts sorted by path.
    pub fn finish(mut self, command: &str, config_toml: &str, seeds: Vec<u64>, verification: Option<bool>) -> Result<Manifest, CliError> {
        self.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: sha256_hex(config_toml.as_bytes()),
            seeds,
            verification,
            artifacts: self.artifacts,
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(self.root.join("manifest.json"), json + "\n")?;
        Ok(manifest)
    }
}
