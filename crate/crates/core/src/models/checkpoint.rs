//! Checkpoints are a pair of files: `<stem>.json`, a manifest naming each
//! parameter with its shape and offset, and `<stem>.bin`, every parameter
//! value as little-endian f64 in manifest order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::layers::ParamKind;
use super::unet::{build_model, Model};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub kind: ParamKind,
    pub shape: Vec<usize>,
    /// Offset into the value array, in f64 elements.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub config: ModelConfig,
    pub total_values: usize,
    pub params: Vec<ManifestEntry>,
}

const FORMAT: &str = "qunet-checkpoint-v1";

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("json"), stem.with_extension("bin"))
}

pub fn save_checkpoint(model: &Model, stem: &Path) -> Result<()> {
    let mut params = Vec::new();
    let mut bytes = Vec::new();
    let mut offset = 0;
    for (name, kind, t) in model.params() {
        params.push(ManifestEntry { name, kind, shape: t.shape().to_vec(), offset });
        offset += t.len();
        for v in t.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest =
        CheckpointManifest { format: FORMAT.into(), config: model.config().clone(), total_values: offset, params };
    let (json, bin) = paths(stem);
    fs::write(json, serde_json::to_string_pretty(&manifest)? + "\n")?;
    fs::write(bin, bytes)?;
    Ok(())
}

pub fn load_checkpoint(stem: &Path) -> Result<Model> {
    let (json, bin) = paths(stem);
    let manifest: CheckpointManifest = serde_json::from_str(&fs::read_to_string(json)?)?;
    if manifest.format != FORMAT {
        return Err(Error::Checkpoint(format!("unknown checkpoint format {}", manifest.format)));
    }
    let bytes = fs::read(bin)?;
    if bytes.len() != manifest.total_values * 8 {
        return Err(Error::Checkpoint(format!(
            "value file holds {} bytes, manifest expects {}",
            bytes.len(),
            manifest.total_values * 8
        )));
    }
    let values: Vec<f64> =
        bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();

    let mut model = build_model(&manifest.config, 0)?;
    let mut slots = model.params_mut();
    if slots.len() != manifest.params.len() {
        return Err(Error::Checkpoint(format!(
            "manifest lists {} tensors, model has {}",
            manifest.params.len(),
            slots.len()
        )));
    }
    for ((name, _, tensor), entry) in slots.iter_mut().zip(&manifest.params) {
        if *name != entry.name || tensor.shape() != entry.shape.as_slice() {
            return Err(Error::Checkpoint(format!(
                "manifest entry {} {:?} does not match model tensor {name} {:?}",
                entry.name,
                entry.shape,
                tensor.shape()
            )));
        }
        let end = entry.offset + tensor.len();
        if end > values.len() {
            return Err(Error::Checkpoint(format!("entry {} runs past the value file", entry.name)));
        }
        tensor.data_mut().copy_from_slice(&values[entry.offset..end]);
    }
    drop(slots);
    Ok(model)
}
