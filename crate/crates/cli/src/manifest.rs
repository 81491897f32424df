//! Run manifests. The hash covers only the inputs of a run, so two runs with
//! the same inputs share it and their data artifacts are byte-identical.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Inputs that identify a run.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunKey {
    pub command: String,
    pub task: String,
    pub task_sha256: String,
    /// Hashes of other input files, by role.
    pub inputs: BTreeMap<String, String>,
    pub epsilon: Option<f64>,
    pub degree: Option<usize>,
    pub strategy: Option<String>,
    pub seed: u64,
    pub seeds: Option<usize>,
    /// Remaining options, rendered as strings.
    pub options: BTreeMap<String, String>,
    pub tool_version: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub hash: String,
    #[serde(flatten)]
    pub key: RunKey,
    pub timings_ms: BTreeMap<String, f64>,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn new(mut key: RunKey) -> Self {
        key.tool_version = env!("CARGO_PKG_VERSION").to_string();
        let hash = sha256_hex(&serde_json::to_vec(&key).expect("manifest key serializes"));
        Self { hash, key, timings_ms: BTreeMap::new(), artifacts: Vec::new() }
    }

    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.timings_ms.entry(phase.to_string()).or_default() += start.elapsed().as_secs_f64() * 1e3;
        out
    }

    /// JSON artifact with a top-level `manifest` field.
    pub fn write_json<T: Serialize>(&mut self, dir: &Path, name: &str, value: &T) -> std::io::Result<PathBuf> {
        let mut v = serde_json::to_value(value).map_err(std::io::Error::other)?;
        if let serde_json::Value::Object(map) = &mut v {
            map.insert("manifest".into(), serde_json::Value::String(self.hash.clone()));
        }
        let text = serde_json::to_string_pretty(&v).map_err(std::io::Error::other)?;
        self.write_bytes(dir, name, format!("{text}\n").as_bytes())
    }

    /// CSV artifact whose first line is `# manifest <hash>`.
    pub fn write_csv(&mut self, dir: &Path, name: &str, body: &[u8]) -> std::io::Result<PathBuf> {
        let mut bytes = format!("# manifest {}\n", self.hash).into_bytes();
        bytes.extend_from_slice(body);
        self.write_bytes(dir, name, &bytes)
    }

    pub fn write_bytes(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(name);
        std::fs::write(&path, bytes)?;
        self.artifacts.push(name.to_string());
        Ok(path)
    }

    pub fn finish(&self, dir: &Path) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}_manifest.json", self.key.command));
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(&path, format!("{text}\n"))?;
        Ok(path)
    }
}
