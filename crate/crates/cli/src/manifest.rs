use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::io::sha256_file;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

impl FileHash {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(Self {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        })
    }
}

/// Everything that determines a run's outputs. No timestamps, so equal
/// inputs give byte-identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: BTreeMap<String, FileHash>,
    pub artifacts: BTreeMap<String, FileHash>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            artifacts: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    /// Fails if `self` (about to run) differs from `recorded` in config,
    /// seeds or input contents.
    pub fn check_against(&self, recorded: &RunManifest) -> Result<()> {
        if self.config != recorded.config {
            bail!("manifest drift: run configuration differs from the recorded one");
        }
        if self.seeds != recorded.seeds {
            bail!("manifest drift: seeds differ from the recorded ones");
        }
        for (name, old) in &recorded.inputs {
            match self.inputs.get(name) {
                Some(new) if new.sha256 == old.sha256 => {}
                Some(new) => bail!("manifest drift: input `{name}` ({}) hash changed", new.path),
                None => bail!("manifest drift: input `{name}` missing"),
            }
        }
        if let Some(extra) = self.inputs.keys().find(|k| !recorded.inputs.contains_key(*k)) {
            bail!("manifest drift: input `{extra}` not in the recorded manifest");
        }
        Ok(())
    }
}
