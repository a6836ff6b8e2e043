//! Versioned JSON model files.

use std::fs;
use std::path::{Path, PathBuf};

use etree_core::EnergyTree;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT: &str = "etree-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: corrupt model file: {message}", .path.display())]
    Corrupt { path: PathBuf, message: String },
    #[error("{}: model format version {found} is not supported (this build reads version {VERSION})", .path.display())]
    Version { path: PathBuf, found: u64 },
}

#[derive(Serialize)]
struct EnvelopeRef<'a> {
    format: &'static str,
    version: u32,
    model: &'a EnergyTree,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u64,
}

#[derive(Deserialize)]
struct Envelope {
    model: EnergyTree,
}

pub fn to_json(tree: &EnergyTree) -> String {
    serde_json::to_string_pretty(&EnvelopeRef { format: FORMAT, version: VERSION, model: tree })
        .expect("model serializes")
}

pub fn from_json(text: &str, path: &Path) -> Result<EnergyTree, ModelError> {
    let corrupt = |message: String| ModelError::Corrupt { path: path.into(), message };
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
    let header = Header::deserialize(&value).map_err(|e| corrupt(e.to_string()))?;
    if header.format != FORMAT {
        return Err(corrupt(format!("unexpected format tag `{}`", header.format)));
    }
    if header.version != u64::from(VERSION) {
        return Err(ModelError::Version { path: path.into(), found: header.version });
    }
    let envelope = Envelope::deserialize(value).map_err(|e| corrupt(e.to_string()))?;
    Ok(envelope.model)
}

pub fn save(tree: &EnergyTree, path: &Path) -> Result<(), ModelError> {
    fs::write(path, to_json(tree)).map_err(|source| ModelError::Io { path: path.into(), source })
}

pub fn load(path: &Path) -> Result<EnergyTree, ModelError> {
    let text = fs::read_to_string(path).map_err(|source| ModelError::Io { path: path.into(), source })?;
    from_json(&text, path)
}
