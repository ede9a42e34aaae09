use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::Stage;
use super::PipelineError;

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(|_| PipelineError::MissingInput(path.to_path_buf()))?;
    Ok(sha256_bytes(&bytes))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the output directory for outputs, as given for inputs.
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub outputs: Vec<FileRecord>,
    pub wall_clock_ms: u64,
}

/// Record of one pipeline run. Stage records are only ever appended.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub inputs: Vec<FileRecord>,
    pub stages: Vec<StageRecord>,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(config_toml: &str, seed: u64) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: sha256_bytes(config_toml.as_bytes()),
            seed,
            inputs: Vec::new(),
            stages: Vec::new(),
            error: None,
        }
    }

    pub fn outputs(&self) -> impl Iterator<Item = &FileRecord> {
        self.stages.iter().flat_map(|s| s.outputs.iter())
    }

    pub fn write(&self, output_dir: &Path) -> Result<(), PipelineError> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| PipelineError::Runtime(e.to_string()))?;
        text.push('\n');
        fs::write(output_dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    pub fn read(output_dir: &Path) -> Result<Self, PipelineError> {
        let path = output_dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|_| PipelineError::MissingInput(path.clone()))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))
    }

    /// Rehashes every listed output; returns the paths that are missing or
    /// whose content changed.
    pub fn verify(&self, output_dir: &Path) -> Vec<PathBuf> {
        self.outputs()
            .filter(|f| sha256_file(&output_dir.join(&f.path)).map_or(true, |h| h != f.sha256))
            .map(|f| f.path.clone())
            .collect()
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
