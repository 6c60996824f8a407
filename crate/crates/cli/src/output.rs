//! Filesystem helpers shared by every subcommand: output-directory
//! resolution, deterministic writers, and input digests.

use std::fs;
use std::path::{Path, PathBuf};

use motordev_core::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Environment variable consulted when no `--out` flag is given.
pub const OUT_ENV: &str = "MOTORDEV_OUT";

/// Resolves the output directory: explicit flag, then the `MOTORDEV_OUT`
/// environment variable, then the current directory. Creates it if missing.
pub fn resolve_out_dir(flag: Option<&Path>) -> Result<PathBuf> {
    let dir = match flag {
        Some(p) => p.to_path_buf(),
        None => match std::env::var_os(OUT_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => PathBuf::from("."),
        },
    };
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Writes pretty-printed JSON with a trailing newline. Key order comes from
/// struct field order and sorted maps, so a rerun is byte-identical.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let mut hex = String::with_capacity(64);
    for byte in hasher.finalize() {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

/// Loads a user-supplied JSON file. Read and parse failures are reported as
/// validation errors so they exit with the usage status, not the runtime one.
pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidParam(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidParam(format!("{}: {e}", path.display())))
}
