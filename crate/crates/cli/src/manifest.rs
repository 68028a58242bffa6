//! Run manifests: the command, every flag, the seed and the files written.

use crate::error::{io_err, CliResult};
use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn start<A: Serialize>(command: &str, args: &A, seed: Option<u64>) -> CliResult<Self> {
        Ok(Self {
            command: command.to_string(),
            args: serde_json::to_value(args)?,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: now(),
            finished_at: String::new(),
            outputs: Vec::new(),
        })
    }

    pub fn record(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Stamps the finish time and writes the manifest to `path`.
    pub fn finish(mut self, path: &Path) -> CliResult<()> {
        self.finished_at = now();
        write_json(path, &self)
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

/// `out.csv` -> `out.<suffix>`, e.g. `out.manifest.json`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn ensure_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(io_err(dir)),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sibling_names() {
        assert_eq!(sibling(Path::new("a/b/fit.json"), "manifest.json"), Path::new("a/b/fit.manifest.json"));
        assert_eq!(sibling(Path::new("series.csv"), "json"), Path::new("series.json"));
    }
}
