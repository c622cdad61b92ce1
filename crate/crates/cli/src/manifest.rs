//! Run manifests: enough to audit and replay a command.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    /// Git-style blob hash (sha256 over `"blob <len>\0" + content`).
    pub blob_sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Fully resolved configuration of the command.
    pub config: Value,
    pub seed: Option<u64>,
    /// Relative paths in `config` resolve against this directory.
    pub working_dir: PathBuf,
    pub out_dir: PathBuf,
    pub inputs: Vec<FileRecord>,
    /// Paths relative to `out_dir`.
    pub outputs: Vec<FileRecord>,
    pub started_unix_ms: u128,
    /// Wall-clock seconds per phase, plus `total`.
    pub timings: BTreeMap<String, f64>,
    pub exit_code: u8,
}

pub const MANIFEST_NAME: &str = "manifest.json";
