//! Run manifests: every command writes, next to its output, a record of
//! what ran with which inputs and parameters. Nothing in it depends on
//! time or randomness, so identical runs produce identical manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{iofs, Result};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub input_paths: Vec<String>,
    /// Sorted parameter echo; everything that shaped the run.
    pub parameter_echo: BTreeMap<String, String>,
    pub output_paths: Vec<String>,
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            input_paths: Vec::new(),
            parameter_echo: BTreeMap::new(),
            output_paths: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.input_paths.push(path.display().to_string());
        self
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.parameter_echo.insert(key.to_string(), value.to_string());
        self
    }

    pub fn note(mut self, note: impl ToString) -> Self {
        self.notes.push(note.to_string());
        self
    }

    /// Writes the manifest next to `out` and records `out` as the run's
    /// output.
    pub fn write_for(mut self, out: &Path) -> Result<()> {
        let path = manifest_path(out);
        self.output_paths.push(out.display().to_string());
        let json = serde_json::to_string_pretty(&self).expect("manifest serializes");
        iofs::atomic_write(&path, format!("{json}\n").as_bytes())
    }
}

/// `stair.csv` gets its manifest at `stair.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}
