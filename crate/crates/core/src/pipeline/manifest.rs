//! Per-directory `manifest.json`: command, seeds, config snapshot and hash,
//! and SHA-256 digests of inputs and outputs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{RunConfig, StageSeeds};
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// The config as recorded in manifests. The output directory is left out
/// so the same run written to two places has identical manifests.
pub fn config_snapshot(cfg: &RunConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(cfg).expect("config serialises");
    if let Some(map) = v.as_object_mut() {
        map.remove("output_dir");
    }
    v
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let text = serde_json::to_string(&config_snapshot(cfg)).expect("json");
    hex(&Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    seed: u64,
    seeds: StageSeeds,
    config_hash: String,
    config: serde_json::Value,
    inputs: BTreeMap<String, String>,
    artifacts: BTreeMap<String, String>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `dir/manifest.json`. `inputs` are paths relative to the output
/// root; `artifacts` are file names inside `dir`.
pub fn write_manifest(
    root: &Path,
    dir: &Path,
    command: &str,
    cfg: &RunConfig,
    inputs: &[&str],
    artifacts: &[String],
) -> Result<()> {
    let mut input_hashes = BTreeMap::new();
    for rel in inputs {
        input_hashes.insert(rel.to_string(), sha256_file(&root.join(rel))?);
    }
    let mut artifact_hashes = BTreeMap::new();
    for name in artifacts {
        artifact_hashes.insert(name.clone(), sha256_file(&dir.join(name))?);
    }
    let manifest = Manifest {
        command,
        seed: cfg.seed,
        seeds: cfg.seeds(),
        config_hash: config_hash(cfg),
        config: config_snapshot(cfg),
        inputs: input_hashes,
        artifacts: artifact_hashes,
    };
    write_json(&dir.join(MANIFEST), &manifest)
}
