//! Run manifest written next to every set of outputs.

use crate::config::RunConfig;
use hsbg::bgsweep::execute::hex;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::Path;

pub const MANIFEST_FILE: &str = "manifest.toml";
/// Marker left in an output directory whose run did not finish.
pub const INCOMPLETE_FILE: &str = "INCOMPLETE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Complete,
    Interrupted,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub status: Status,
    pub seed: u64,
    pub config_hash: String,
    pub code_version: String,
    pub fault_injected: bool,
    pub files: Vec<String>,
    pub config: toml::Table,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    hex(&Sha256::digest(cfg.canonical_toml().as_bytes()))
}

impl Manifest {
    pub fn new(cfg: &RunConfig, status: Status, fault_injected: bool, mut files: Vec<String>) -> Self {
        files.sort();
        let canonical = cfg.canonical_toml();
        Manifest {
            command: cfg.mode.name().to_string(),
            status,
            seed: cfg.ensemble.seed,
            config_hash: hex(&Sha256::digest(canonical.as_bytes())),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            fault_injected,
            files,
            config: canonical.parse().expect("canonical config parses"),
        }
    }

    /// Writes the manifest and sets or clears the incomplete marker.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let text = toml::to_string(self).map_err(std::io::Error::other)?;
        std::fs::write(dir.join(MANIFEST_FILE), text)?;
        let marker = dir.join(INCOMPLETE_FILE);
        match self.status {
            Status::Complete => {
                if marker.exists() {
                    std::fs::remove_file(marker)?;
                }
            }
            _ => std::fs::write(marker, format!("{:?}\n", self.status).to_lowercase())?,
        }
        Ok(())
    }
}
