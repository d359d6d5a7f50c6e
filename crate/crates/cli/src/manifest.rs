//! Run manifests: the resolved configuration plus hashes of every input.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::inputs::hash_path;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// Command line as typed; informational only.
    pub invocation: Vec<String>,
    pub config: RunConfig,
    pub inputs: Vec<InputHash>,
}

impl Manifest {
    pub fn new(config: &RunConfig, invocation: Vec<String>) -> Result<Self> {
        let inputs = config
            .command
            .inputs()
            .into_iter()
            .map(|path| Ok(InputHash { sha256: hash_path(&path)?, path }))
            .collect::<Result<_>>()?;
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            invocation,
            config: config.clone(),
            inputs,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("manifest: cannot read {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("manifest: {}", path.display()))
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("manifest: cannot write {}", path.display()))?;
        Ok(path)
    }

    /// Fails when an input changed since the manifest was written.
    pub fn verify_inputs(&self) -> Result<()> {
        for input in &self.inputs {
            let now = hash_path(&input.path)?;
            if now != input.sha256 {
                bail!("manifest: input {} changed since the recorded run", input.path.display());
            }
        }
        Ok(())
    }
}
