//! `manifest.json`, one per output directory.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::formats::write_json;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub flags: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
    pub version: String,
    pub runtime_seconds: f64,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        flags: serde_json::Value,
        inputs: &[PathBuf],
        seed: Option<u64>,
        runtime_seconds: f64,
    ) -> CliResult<Self> {
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(InputDigest {
                    path: p.clone(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<CliResult<_>>()?;
        Ok(Self {
            subcommand: subcommand.to_owned(),
            flags,
            inputs,
            seed,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            runtime_seconds,
        })
    }

    pub fn write(&self, out_dir: &Path) -> CliResult<()> {
        write_json(&out_dir.join(MANIFEST_FILE), self)
    }
}
