//! Run manifests: enough provenance to replay a run and check its artifacts.

use anyhow::Result;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Serialize)]
pub struct FileStamp {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub argv: Vec<String>,
    pub config_path: Option<String>,
    pub seed: Option<u64>,
    pub inputs: Vec<FileStamp>,
    pub outputs: Vec<FileStamp>,
    pub unix_timestamp: u64,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(subcommand: &str, config_path: Option<&Path>, seed: Option<u64>) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            argv: std::env::args().collect(),
            config_path: config_path.map(|p| p.display().to_string()),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            unix_timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(stamp(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(stamp(path)?);
        Ok(())
    }

    /// Writes next to the primary output, or under the given name for
    /// commands without file artifacts.
    pub fn write(&self, primary_output: Option<&Path>) -> Result<PathBuf> {
        let path = match primary_output {
            Some(out) => {
                let mut s = out.as_os_str().to_owned();
                s.push(".manifest.json");
                PathBuf::from(s)
            }
            None => PathBuf::from(format!("blkit-{}.manifest.json", self.subcommand)),
        };
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}

fn stamp(path: &Path) -> Result<FileStamp> {
    Ok(FileStamp {
        path: path.display().to_string(),
        sha256: blkit::checkpoint::file_digest(path)?,
    })
}
