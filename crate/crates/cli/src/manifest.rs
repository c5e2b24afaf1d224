use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> CliResult<Self> {
        Ok(Self { path: path.to_path_buf(), sha256: sha256_file(path)? })
    }
}

/// Record of one command invocation: what went in, what came out.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: BTreeMap<String, FileDigest>,
    pub outputs: BTreeMap<String, FileDigest>,
    pub wall_time_secs: f64,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            wall_time_secs: 0.0,
        }
    }

    pub fn input(&mut self, name: &str, path: &Path) -> CliResult<String> {
        let d = FileDigest::of(path)?;
        let sha = d.sha256.clone();
        self.inputs.insert(name.to_string(), d);
        Ok(sha)
    }

    pub fn output(&mut self, name: &str, path: &Path) -> CliResult<()> {
        self.outputs.insert(name.to_string(), FileDigest::of(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_file(path, serde_json::to_string_pretty(self).map_err(|e| CliError::Data(e.to_string()))?)
    }
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    Ok(sha256_bytes(&read_file(path)?))
}

pub fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}
