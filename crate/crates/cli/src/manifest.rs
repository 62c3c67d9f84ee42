//! Artifact writing and the per-command provenance manifest.
//!
//! Manifests carry no timestamps or absolute paths, so re-running a command on the same
//! inputs reproduces them byte for byte.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sicf_core::fusion::Coefficients;
use sicf_core::pipeline::ProviderInfo;
use sicf_core::uncertainty::PhiConfig;

use crate::error::{CliError, CliResult};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDigest {
    pub role: String,
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub engine_version: String,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub providers: Option<ProviderInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Coefficients>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<OutputDigest>,
}

impl Manifest {
    pub fn new(command: &str, config_hash: String) -> Self {
        Manifest {
            command: command.to_string(),
            engine_version: ENGINE_VERSION.to_string(),
            config_hash,
            providers: None,
            phi: None,
            coefficients: None,
            ratio: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn file_name(command: &str) -> String {
        format!("manifest.{command}.json")
    }

    /// Records an input file by name and content hash.
    pub fn input(&mut self, role: &str, path: &Path) -> CliResult<()> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.push(InputDigest {
            role: role.to_string(),
            file: file_name(path),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn write(&self, out_dir: &Path) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        let path = out_dir.join(Self::file_name(&self.command));
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// Writes artifacts into one output directory and records them in a manifest.
pub struct ArtifactWriter<'a> {
    out_dir: &'a Path,
    manifest: &'a mut Manifest,
}

impl<'a> ArtifactWriter<'a> {
    pub fn new(out_dir: &'a Path, manifest: &'a mut Manifest) -> CliResult<Self> {
        std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
        Ok(ArtifactWriter { out_dir, manifest })
    }

    pub fn write(&mut self, file: &str, contents: &str, records: usize) -> CliResult<()> {
        let path = self.out_dir.join(file);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.manifest.outputs.push(OutputDigest {
            file: file.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
            records,
        });
        Ok(())
    }

    pub fn jsonl<T: Serialize>(&mut self, file: &str, records: &[T]) -> CliResult<()> {
        self.write(file, &sicf_core::jsonl::to_string(records), records.len())
    }

    pub fn json<T: Serialize>(&mut self, file: &str, value: &T, records: usize) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
        text.push('\n');
        self.write(file, &text, records)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
