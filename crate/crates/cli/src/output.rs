//! Output directory ownership, artifact checksums and run manifests.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Settings;
use crate::CliError;

pub const LOCK_FILE: &str = ".ymlab.lock";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

/// An output directory held under a lock file for the lifetime of the value.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    lock: PathBuf,
    artifacts: Vec<Artifact>,
}

impl OutputDir {
    pub fn acquire(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", root.display())))?;
        let lock = root.join(LOCK_FILE);
        let mut f = OpenOptions::new().write(true).create_new(true).open(&lock).map_err(|e| {
            CliError::Config(format!("output directory {} is in use ({}): {e}", root.display(), lock.display()))
        })?;
        let _ = writeln!(f, "{}", std::process::id());
        Ok(Self { root: root.to_path_buf(), lock, artifacts: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `bytes` to `name` inside the directory and records its checksum.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(CliError::io)?;
        }
        let mut f = File::create(&path).map_err(CliError::io)?;
        f.write_all(bytes).map_err(CliError::io)?;
        self.artifacts.retain(|a| a.file != name);
        self.artifacts.push(Artifact { file: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    pub fn artifacts(&self) -> &[Artifact] {
        &self.artifacts
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Conventions fixed for the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConventionChoices {
    pub b_branch: String,
    pub normalization: Vec<String>,
    pub covariant_derivative: String,
}

/// Self-contained record of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Settings,
    pub seeds: Vec<u64>,
    /// Tolerances in force: quadrature, and each check's tolerance by id.
    pub tolerances: serde_json::Value,
    pub conventions: ConventionChoices,
    pub status: String,
    pub results: serde_json::Value,
    pub wall_time_s: f64,
    pub artifacts: Vec<Artifact>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("bad manifest {}: {e}", path.display())))
    }
}

pub fn conventions(settings: &Settings) -> ConventionChoices {
    ConventionChoices {
        b_branch: "minus: b = 3(n-2) - (n+2) sqrt(n-2)/sqrt(2)".into(),
        normalization: settings.conventions.iter().map(|c| c.label().to_string()).collect(),
        covariant_derivative: "nabla B = dB - [Gamma, B]".into(),
    }
}
