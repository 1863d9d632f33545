use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::fsio;
use crate::scores::to_json_bytes;

#[derive(Debug, Clone, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

/// Config echo plus input and output hashes for one command run.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>, config: impl Serialize) -> Self {
        Manifest {
            tool: "spanprobe",
            tool_version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            seed,
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn hash_all(paths: &[&Path]) -> Result<Vec<FileHash>> {
        let mut out = Vec::new();
        for p in paths {
            if p.is_dir() {
                let mut entries: Vec<PathBuf> = std::fs::read_dir(p)
                    .map_err(|e| crate::Error::io(p, e))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|e| e.is_file())
                    .collect();
                entries.sort();
                for e in entries {
                    out.push(FileHash { path: e.display().to_string(), sha256: fsio::sha256_file(&e)? });
                }
            } else {
                out.push(FileHash { path: p.display().to_string(), sha256: fsio::sha256_file(p)? });
            }
        }
        Ok(out)
    }

    pub fn inputs(mut self, paths: &[&Path]) -> Result<Self> {
        self.inputs = Self::hash_all(paths)?;
        Ok(self)
    }

    /// Hash `outputs` and write the manifest to `path`.
    pub fn write(mut self, outputs: &[&Path], path: &Path) -> Result<()> {
        self.outputs = Self::hash_all(outputs)?;
        fsio::write_atomic(path, &to_json_bytes(&self))
    }
}

/// `<primary output>.manifest.json`
pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut s = primary.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
