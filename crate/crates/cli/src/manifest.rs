use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliError, Outputs, RunConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance of a run. `config` alone is enough to repeat it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub config_sha256: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn digest_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::internal(format!("hashing {}: {e}", path.display())))?;
    Ok(hex(&Sha256::digest(bytes)))
}

pub fn config_hash(config: &RunConfig) -> Result<String, CliError> {
    let bytes = serde_json::to_vec(config)
        .map_err(|e| CliError::internal(format!("serialising config: {e}")))?;
    Ok(hex(&Sha256::digest(bytes)))
}

pub(crate) fn write_manifest(config: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let inputs = config
        .input
        .iter()
        .chain(config.overrides.iter())
        .map(|p| Ok(FileDigest { path: p.clone(), sha256: digest_file(p)? }))
        .collect::<Result<Vec<_>, CliError>>()?;
    let outputs = out
        .files()
        .iter()
        .map(|f| Ok(FileDigest { path: f.into(), sha256: digest_file(&out.dir().join(f))? }))
        .collect::<Result<Vec<_>, CliError>>()?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        config_sha256: config_hash(config)?,
        inputs,
        outputs,
    };
    out.write_json("manifest.json", &manifest)
}

pub fn read_manifest(path: &Path) -> Result<Manifest, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("manifest {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("manifest {}: {e}", path.display())))
}
