//! Dataset and checkpoint files, loss curves and heatmaps.
//!
//! Every JSON artifact carries an integer `format_version`; readers refuse
//! versions newer than [`FORMAT_VERSION`].

mod checkpoint;
mod dataset;
mod plot;
mod viridis;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointManifest, ParamShape};
pub use dataset::{read_dataset, write_dataset, Dataset, DatasetManifest, FileEntry, SampleMeta};
pub use plot::{export_heatmap, heatmap_svg, HeatmapOptions};
pub use viridis::VIRIDIS;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::trainer::EpochLog;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: corrupt at byte {offset}")]
    CorruptFile { path: PathBuf, offset: u64 },
    #[error("{path}: checksum mismatch")]
    ChecksumMismatch { path: PathBuf },
    #[error("{path}: format version {found}, this build reads up to {supported}")]
    VersionMismatch { path: PathBuf, found: u32, supported: u32 },
    #[error("{path}: manifest lists {expected} entries, found {found}")]
    CountMismatch { path: PathBuf, expected: usize, found: usize },
    #[error("{path}: {detail}")]
    Incompatible { path: PathBuf, detail: String },
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|source| IoError::Io { path: path.into(), source })
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    std::fs::write(path, bytes).map_err(|source| IoError::Io { path: path.into(), source })
}

pub(crate) fn create_dir(path: &Path) -> Result<(), IoError> {
    std::fs::create_dir_all(path).map_err(|source| IoError::Io { path: path.into(), source })
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|source| IoError::Json { path: path.into(), source })?;
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|source| IoError::Json { path: path.into(), source })
}

/// Checks the `format_version` field of a JSON file before full parsing.
pub(crate) fn check_version(path: &Path) -> Result<(), IoError> {
    let v: serde_json::Value = read_json(path)?;
    let found = v.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found == 0 || found > FORMAT_VERSION {
        return Err(IoError::VersionMismatch { path: path.into(), found, supported: FORMAT_VERSION });
    }
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub(crate) fn f32_le_bytes(values: impl IntoIterator<Item = f32>) -> Vec<u8> {
    values.into_iter().flat_map(f32::to_le_bytes).collect()
}

pub(crate) fn f32_from_le(bytes: &[u8]) -> Vec<f32> {
    bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect()
}

/// `epoch,lr,train_loss[,test_loss]`, one row per epoch.
pub fn loss_csv(curve: &[EpochLog]) -> String {
    let with_test = curve.iter().any(|l| l.test_loss.is_some());
    let mut s = String::from(if with_test { "epoch,lr,train_loss,test_loss\n" } else { "epoch,lr,train_loss\n" });
    for l in curve {
        let _ = write!(s, "{},{:e},{:e}", l.epoch, l.lr, l.train_loss);
        if with_test {
            match l.test_loss {
                Some(t) => {
                    let _ = write!(s, ",{t:e}");
                }
                None => s.push(','),
            }
        }
        s.push('\n');
    }
    s
}

pub fn write_loss_csv(path: &Path, curve: &[EpochLog]) -> Result<(), IoError> {
    write_bytes(path, loss_csv(curve).as_bytes())
}

/// Parses [`loss_csv`] output back.
pub fn parse_loss_csv(text: &str) -> Option<Vec<EpochLog>> {
    let mut lines = text.lines();
    let header = lines.next()?;
    let with_test = header.split(',').count() == 4;
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            Some(EpochLog {
                epoch: f.first()?.parse().ok()?,
                lr: f.get(1)?.parse().ok()?,
                train_loss: f.get(2)?.parse().ok()?,
                test_loss: if with_test { f.get(3).and_then(|v| v.parse().ok()) } else { None },
            })
        })
        .collect()
}
