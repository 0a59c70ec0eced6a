use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Record of one command invocation. Holds no timestamps or absolute output
/// paths, so two runs with the same inputs produce the same manifest.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub parameters: serde_json::Value,
    /// Input path as given -> sha256 of its contents.
    pub inputs: BTreeMap<String, String>,
    /// Output file name -> sha256 of its contents.
    pub outputs: BTreeMap<String, String>,
}

/// Collects outputs written under one directory and the inputs they came
/// from, then writes `manifest.json` alongside them.
pub struct Artifacts {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Artifacts {
    pub fn new(dir: &Path, command: &str, seed: Option<u64>, parameters: serde_json::Value) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                seed,
                parameters,
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
            },
        })
    }

    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.manifest.inputs.insert(path.display().to_string(), digest(&bytes));
        Ok(bytes)
    }

    pub fn read_json<T: serde::de::DeserializeOwned>(&mut self, path: &Path) -> Result<T> {
        let bytes = self.read_input(path)?;
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.insert(name.to_string(), digest(bytes));
        log::info!("wrote {}", path.display());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    pub fn finish(self) -> Result<()> {
        let mut s = serde_json::to_string_pretty(&self.manifest)?;
        s.push('\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, s).with_context(|| format!("writing {}", path.display()))
    }
}
