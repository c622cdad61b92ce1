//! Layered configuration: built-in defaults, then `--config` file, then the
//! `PAIRRANK_SEED` environment variable, then command-line flags.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};
use crate::formats::read_file;

pub const SEED_ENV: &str = "PAIRRANK_SEED";

/// Renders a serde path as a JSON pointer, e.g. `n_grid.raw[2]` -> `/n_grid/raw/2`.
pub fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

/// Deserializes `value`, reporting failures with the JSON pointer of the bad field.
pub fn from_value<T: DeserializeOwned>(value: Value, what: &str) -> CliResult<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let pointer = json_pointer(e.path());
        let pointer = if pointer.is_empty() { "/".into() } else { pointer };
        CliError::input(format!("{what}: {pointer}: {}", e.inner()))
    })
}

pub fn parse_json(path: &Path) -> CliResult<Value> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes)
        .map_err(|e| CliError::input(format!("{}: invalid JSON: {e}", path.display())))
}

fn overlay(base: &mut Map<String, Value>, top: Map<String, Value>) {
    for (k, v) in top {
        base.insert(k, v);
    }
}

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::input(format!("{SEED_ENV} must be an unsigned integer, got `{s}`"))),
        Err(_) => Ok(None),
    }
}

/// Merges the layers and deserializes the resolved configuration.
///
/// `flags` must serialize only the flags the user actually passed.
pub fn resolve<T: DeserializeOwned>(
    defaults: Value,
    file: Option<&Path>,
    flags: &impl Serialize,
    has_seed: bool,
) -> CliResult<T> {
    let mut merged = match defaults {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    if let Some(path) = file {
        match parse_json(path)? {
            Value::Object(m) => overlay(&mut merged, m),
            _ => {
                return Err(CliError::input(format!(
                    "{}: config must be a JSON object",
                    path.display()
                )))
            }
        }
    }
    if has_seed {
        if let Some(seed) = env_seed()? {
            merged.insert("seed".into(), seed.into());
        }
    }
    match serde_json::to_value(flags).expect("flags serialize") {
        Value::Object(m) => overlay(&mut merged, m),
        _ => unreachable!("flags are a struct"),
    }
    from_value(Value::Object(merged), "configuration")
}
