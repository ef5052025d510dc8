use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    check_version, create_dir, f32_from_le, f32_le_bytes, read_bytes, read_json, sha256_hex, write_bytes, write_json,
    IoError, FORMAT_VERSION,
};
use crate::model::{ModelConfig, ModelParams};
use crate::trainer::Adam;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamShape {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerMeta {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub model: ModelConfig,
    pub total: usize,
    pub params: Vec<ParamShape>,
    pub params_sha256: String,
    /// Epochs completed.
    pub epoch: usize,
    pub optimizer: Option<OptimizerMeta>,
}

pub struct Checkpoint {
    pub manifest: CheckpointManifest,
    pub params: ModelParams,
    pub optimizer: Option<Adam>,
}

/// Writes `manifest.json`, `params.bin` (flat LE f32 in layout order) and,
/// with an optimizer, `optimizer.bin` (first then second moments).
pub fn save_checkpoint(dir: &Path, params: &ModelParams, optimizer: Option<&Adam>, epoch: usize) -> Result<(), IoError> {
    create_dir(dir)?;
    let bin = f32_le_bytes(params.data.iter().copied());
    write_bytes(&dir.join("params.bin"), &bin)?;
    let optimizer = match optimizer {
        Some(a) => {
            let ob = f32_le_bytes(a.m.iter().chain(&a.v).copied());
            write_bytes(&dir.join("optimizer.bin"), &ob)?;
            Some(OptimizerMeta { beta1: a.beta1, beta2: a.beta2, eps: a.eps, step: a.step, sha256: sha256_hex(&ob) })
        }
        None => {
            let _ = std::fs::remove_file(dir.join("optimizer.bin"));
            None
        }
    };
    let manifest = CheckpointManifest {
        format_version: FORMAT_VERSION,
        model: params.config.clone(),
        total: params.data.len(),
        params: params
            .layout
            .specs()
            .iter()
            .map(|s| ParamShape { name: s.name.clone(), shape: s.shape.clone(), offset: s.offset })
            .collect(),
        params_sha256: sha256_hex(&bin),
        epoch,
        optimizer,
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint, IoError> {
    let manifest_path = dir.join("manifest.json");
    check_version(&manifest_path)?;
    let manifest: CheckpointManifest = read_json(&manifest_path)?;
    let layout = manifest.model.layout();
    let declared: Vec<(&str, &[usize], usize)> =
        manifest.params.iter().map(|p| (p.name.as_str(), p.shape.as_slice(), p.offset)).collect();
    let expected: Vec<(&str, &[usize], usize)> =
        layout.specs().iter().map(|s| (s.name.as_str(), s.shape.as_slice(), s.offset)).collect();
    if declared != expected || manifest.total != layout.total() {
        return Err(IoError::Incompatible {
            path: manifest_path,
            detail: "parameter shapes do not match the model config".into(),
        });
    }
    let path = dir.join("params.bin");
    let bin = read_bytes(&path)?;
    if bin.len() != 4 * manifest.total {
        return Err(IoError::CorruptFile { path, offset: bin.len().min(4 * manifest.total) as u64 });
    }
    if sha256_hex(&bin) != manifest.params_sha256 {
        return Err(IoError::ChecksumMismatch { path });
    }
    let params = ModelParams::from_data(manifest.model.clone(), f32_from_le(&bin))
        .map_err(|e| IoError::Incompatible { path: path.clone(), detail: e.to_string() })?;
    let optimizer = match &manifest.optimizer {
        None => None,
        Some(meta) => {
            let path = dir.join("optimizer.bin");
            let ob = read_bytes(&path)?;
            if ob.len() != 8 * manifest.total {
                return Err(IoError::CorruptFile { path, offset: ob.len().min(8 * manifest.total) as u64 });
            }
            if sha256_hex(&ob) != meta.sha256 {
                return Err(IoError::ChecksumMismatch { path });
            }
            let values = f32_from_le(&ob);
            let (m, v) = values.split_at(manifest.total);
            Some(Adam { beta1: meta.beta1, beta2: meta.beta2, eps: meta.eps, step: meta.step, m: m.to_vec(), v: v.to_vec() })
        }
    };
    Ok(Checkpoint { manifest, params, optimizer })
}
