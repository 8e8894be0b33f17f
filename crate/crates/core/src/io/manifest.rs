//! Run manifests: what was run, with which code, and checksums of every output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::checkpoint::CHECKPOINT_FORMAT_VERSION;
use super::timeseries::TIMESERIES_FORMAT_VERSION;

pub const MANIFEST_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest IO on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported manifest format version {0}")]
    UnsupportedVersion(u32),
    #[error("checksum mismatch for {file}")]
    Checksum { file: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ManifestError + '_ {
    move |source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionStatus {
    Ok,
    Diverged,
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatVersions {
    pub manifest: u32,
    pub timeseries: u32,
    pub checkpoint: u32,
}

impl Default for FormatVersions {
    fn default() -> Self {
        Self {
            manifest: MANIFEST_FORMAT_VERSION,
            timeseries: TIMESERIES_FORMAT_VERSION,
            checkpoint: CHECKPOINT_FORMAT_VERSION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    /// Seconds since the Unix epoch at start.
    pub started: f64,
    pub elapsed_s: f64,
}

impl WallClock {
    pub fn since(start: SystemTime) -> Self {
        Self {
            started: start
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
            elapsed_s: start.elapsed().map(|d| d.as_secs_f64()).unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub code_version: String,
    pub formats: FormatVersions,
    pub wall_clock: WallClock,
    pub status: CompletionStatus,
    pub detail: Option<String>,
    pub warnings: Vec<String>,
    /// Output file name (relative to the manifest) to SHA-256 hex digest.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, started: SystemTime) -> Self {
        Self {
            command: command.to_string(),
            config,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            formats: FormatVersions::default(),
            wall_clock: WallClock::since(started),
            status: CompletionStatus::Ok,
            detail: None,
            warnings: Vec::new(),
            outputs: BTreeMap::new(),
        }
    }

    /// Records the checksum of `dir/name`.
    pub fn add_output(&mut self, dir: &Path, name: &str) -> Result<(), ManifestError> {
        let digest = sha256_file(&dir.join(name))?;
        self.outputs.insert(name.to_string(), digest);
        Ok(())
    }

    /// Everything except the wall-clock record; equal for repeated runs of one config.
    pub fn identity(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).unwrap_or_default();
        if let Some(obj) = v.as_object_mut() {
            obj.remove("wall_clock");
        }
        v
    }

    /// Recomputes every checksum against the files in `dir`.
    pub fn verify(&self, dir: &Path) -> Result<(), ManifestError> {
        for (file, digest) in &self.outputs {
            if sha256_file(&dir.join(file))? != *digest {
                return Err(ManifestError::Checksum { file: file.clone() });
            }
        }
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String, ManifestError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes `manifest` through a temporary file and a rename.
pub fn write_manifest(manifest: &RunManifest, path: &Path) -> Result<(), ManifestError> {
    let text = serde_json::to_string_pretty(manifest)?;
    let tmp = path.with_extension("json.tmp");
    let mut f = std::fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(text.as_bytes()).map_err(io_err(&tmp))?;
    f.write_all(b"\n").map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, ManifestError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let m: RunManifest = serde_json::from_str(&text)?;
    if m.formats.manifest != MANIFEST_FORMAT_VERSION {
        return Err(ManifestError::UnsupportedVersion(m.formats.manifest));
    }
    Ok(m)
}
