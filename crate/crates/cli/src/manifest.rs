//! The run manifest every subcommand leaves behind.

use std::path::{Path, PathBuf};

use motordev_core::Result;
use serde::Serialize;
use serde_json::Value;

use crate::output::{sha256_file, write_json};

/// Audit record of one command invocation: the command, the options it
/// resolved, what it read, what it wrote, and how it ended. Written even
/// when the command fails, so a broken run is still inspectable. Contains
/// no timestamps or absolute output paths: a rerun with the same inputs
/// produces the same bytes.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub options: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<InputDigest>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Input file identity: the path as given and a content digest. The digest
/// is absent when the file could not be read; the command's own error
/// explains why.
#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
}

impl InputDigest {
    pub fn of(path: &Path) -> InputDigest {
        InputDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path).ok(),
        }
    }
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        write_json(dir, "manifest.json", self)
    }
}
