use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::Invocation;
use crate::CliError;

pub const TOOL: &str = "densdiff";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDigest {
    pub flag: String,
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to rerun a command: resolved flags, seed, input
/// digests and the tool version. Output locations are stored as bare file
/// names so a replay can target any directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub invocation: Invocation,
    pub seed: Option<u64>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn digest_inputs(inputs: &[(&str, &Path)]) -> Result<Vec<InputDigest>, CliError> {
    inputs
        .iter()
        .map(|(flag, path)| {
            Ok(InputDigest {
                flag: (*flag).to_string(),
                path: path.to_path_buf(),
                sha256: sha256_file(path)?,
            })
        })
        .collect()
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = densdiff::eval::to_json_exact(self).map_err(CliError::from)?;
        fs::write(path, text).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let manifest: RunManifest =
            serde_path_to_error::deserialize(de).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        if manifest.tool != TOOL {
            return Err(CliError::input(format!("manifest was written by {:?}, not {TOOL}", manifest.tool)));
        }
        Ok(manifest)
    }

    /// Fail if any recorded input changed since the manifest was written.
    pub fn verify_inputs(&self) -> Result<(), CliError> {
        for input in &self.inputs {
            let now = sha256_file(&input.path)?;
            if now != input.sha256 {
                return Err(CliError::input(format!(
                    "input --{} ({}) changed since the manifest was written",
                    input.flag,
                    input.path.display()
                )));
            }
        }
        Ok(())
    }
}

/// `dir/stem.ext` → `dir/stem.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}
