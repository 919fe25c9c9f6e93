//! Run manifests: everything needed to reproduce a command's outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use seabed_core::io::atomic_write;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::Command;

pub const MANIFEST_SCHEMA: &str = "seabed-manifest/1";
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Absolute for inputs; relative to the output directory for outputs.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub version: String,
    pub command: Command,
    /// Fully resolved configuration (file, `--set` and flag overrides applied).
    pub config: RunConfig,
    pub threads: usize,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn read(path: &Path) -> CliResult<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let m: RunManifest = serde_json::from_slice(&bytes)?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(CliError::Config(format!("expected schema {MANIFEST_SCHEMA}, found {}", m.schema)));
        }
        Ok(m)
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        atomic_write(&dir.join(MANIFEST_NAME), &bytes)?;
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn record(path: &Path, name: String) -> CliResult<FileRecord> {
    Ok(FileRecord { path: name, sha256: sha256_file(path)? })
}
