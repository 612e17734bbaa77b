//! Filesystem helpers. Inputs that fail to read are input errors (exit 2);
//! outputs that fail to write are IO errors (exit 3).

use std::fs;
use std::path::Path;

use crate::{CliError, Result};

pub fn read_input(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {what} `{}`: {e}", path.display())))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |e: std::io::Error| {
        CliError::Io(format!("cannot write `{}`: {e}", path.display()))
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}
