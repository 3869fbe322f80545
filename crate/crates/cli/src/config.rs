//! Option resolution and run records.
//!
//! Every tunable option resolves through the same chain: command-line flag,
//! then `VOX_*` environment variable (clap merges those two), then the JSON
//! config file, then the built-in default. Each command writes the resolved
//! values to `run.json` in its output directory so a run can be repeated
//! exactly.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use voxcluster::{Error, Result};

/// Flat key-value config file, JSON object with one entry per option name.
pub struct FileConfig {
    values: Map<String, Value>,
    path: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig {
                values: Map::new(),
                path: None,
            });
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config file {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: not valid JSON: {e}", path.display())))?;
        match value {
            Value::Object(values) => Ok(FileConfig {
                values,
                path: Some(path.to_path_buf()),
            }),
            _ => Err(Error::Config(format!(
                "{}: config file must hold a JSON object",
                path.display()
            ))),
        }
    }

    fn lookup<T>(&self, key: &str, kind: &str, read: impl Fn(&Value) -> Option<T>) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => read(v).map(Some).ok_or_else(|| {
                Error::Config(format!(
                    "{}: key '{key}' must be {kind}, got {v}",
                    self.path.as_deref().unwrap_or(Path::new("config")).display()
                ))
            }),
        }
    }

    pub fn usize(&self, cli: Option<usize>, key: &str, default: usize) -> Result<usize> {
        match cli {
            Some(v) => Ok(v),
            None => Ok(self
                .lookup(key, "a nonnegative integer", |v| {
                    v.as_u64().map(|u| u as usize)
                })?
                .unwrap_or(default)),
        }
    }

    pub fn u64(&self, cli: Option<u64>, key: &str, default: u64) -> Result<u64> {
        match cli {
            Some(v) => Ok(v),
            None => Ok(self
                .lookup(key, "a nonnegative integer", Value::as_u64)?
                .unwrap_or(default)),
        }
    }

    pub fn f64(&self, cli: Option<f64>, key: &str, default: f64) -> Result<f64> {
        match cli {
            Some(v) => Ok(v),
            None => Ok(self.lookup(key, "a number", Value::as_f64)?.unwrap_or(default)),
        }
    }

    pub fn f64_opt(&self, cli: Option<f64>, key: &str) -> Result<Option<f64>> {
        match cli {
            Some(v) => Ok(Some(v)),
            None => self.lookup(key, "a number", Value::as_f64),
        }
    }
}

#[derive(Serialize)]
struct RunRecord<'a, P: Serialize> {
    command: &'a str,
    /// None for commands with no randomness.
    seed: Option<u64>,
    params: &'a P,
}

/// Writes `run.json` into `out_dir`, creating the directory first.
pub fn write_run_record(
    out_dir: &Path,
    command: &str,
    seed: Option<u64>,
    params: &impl Serialize,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    let record = RunRecord {
        command,
        seed,
        params,
    };
    let mut json = serde_json::to_string_pretty(&record)
        .map_err(|e| Error::Internal(format!("run record encoding failed: {e}")))?;
    json.push('\n');
    let path = out_dir.join("run.json");
    std::fs::write(&path, json).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
