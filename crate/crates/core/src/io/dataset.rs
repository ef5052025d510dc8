use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    check_version, create_dir, f32_from_le, f32_le_bytes, read_bytes, read_json, sha256_hex, write_bytes, write_json,
    IoError, FORMAT_VERSION,
};
use crate::datagen::{DatagenConfig, GenerationStats, IcRecipe, PdeSample};
use crate::ir::PdeCoefficients;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub count: usize,
    pub base_seed: u64,
    pub stats: GenerationStats,
    pub config: Option<DatagenConfig>,
    pub files: Vec<FileEntry>,
}

/// Per-sample `NNNNNN.meta.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleMeta {
    pub format_version: u32,
    pub draw: u64,
    pub seed: u64,
    pub coefficients: PdeCoefficients,
    pub ic_recipe: Option<IcRecipe>,
    pub n_x: usize,
    pub n_t: usize,
    pub dt_data: f64,
    pub rejected_before: usize,
}

pub struct Dataset {
    pub manifest: DatasetManifest,
    pub samples: Vec<PdeSample>,
}

fn stem(i: usize) -> String {
    format!("{i:06}")
}

/// Writes `manifest.json` plus a meta/bin pair per sample. Identical inputs
/// give identical bytes.
pub fn write_dataset(
    dir: &Path,
    samples: &[PdeSample],
    stats: &GenerationStats,
    config: Option<&DatagenConfig>,
    base_seed: u64,
) -> Result<(), IoError> {
    create_dir(dir)?;
    let mut files = Vec::with_capacity(2 * samples.len());
    for (i, s) in samples.iter().enumerate() {
        let meta = SampleMeta {
            format_version: FORMAT_VERSION,
            draw: s.draw,
            seed: s.seed,
            coefficients: s.coefficients,
            ic_recipe: s.ic_recipe.clone(),
            n_x: s.n_x,
            n_t: s.n_t,
            dt_data: s.dt_data,
            rejected_before: s.rejected_before,
        };
        let meta_name = format!("{}.meta.json", stem(i));
        let mut meta_bytes = serde_json::to_vec_pretty(&meta).expect("sample metadata serializes");
        meta_bytes.push(b'\n');
        write_bytes(&dir.join(&meta_name), &meta_bytes)?;
        let bin_name = format!("{}.bin", stem(i));
        let bin = f32_le_bytes(s.ic.iter().chain(&s.solution).copied());
        write_bytes(&dir.join(&bin_name), &bin)?;
        files.push(FileEntry { sha256: sha256_hex(&meta_bytes), name: meta_name });
        files.push(FileEntry { sha256: sha256_hex(&bin), name: bin_name });
    }
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        count: samples.len(),
        base_seed,
        stats: stats.clone(),
        config: config.cloned(),
        files,
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

fn verify(manifest: &DatasetManifest, path: &Path, name: &str, bytes: &[u8]) -> Result<(), IoError> {
    let entry = manifest.files.iter().find(|f| f.name == name).ok_or_else(|| IoError::Incompatible {
        path: path.into(),
        detail: "not listed in manifest".into(),
    })?;
    if sha256_hex(bytes) != entry.sha256 {
        return Err(IoError::ChecksumMismatch { path: path.into() });
    }
    Ok(())
}

/// Reads a dataset, checking versions, counts, sizes and checksums.
pub fn read_dataset(dir: &Path) -> Result<Dataset, IoError> {
    let manifest_path = dir.join("manifest.json");
    check_version(&manifest_path)?;
    let manifest: DatasetManifest = read_json(&manifest_path)?;
    if manifest.files.len() != 2 * manifest.count {
        return Err(IoError::CountMismatch { path: manifest_path, expected: 2 * manifest.count, found: manifest.files.len() });
    }
    let on_disk = (0..).take_while(|&i| dir.join(format!("{}.bin", stem(i))).exists()).count();
    if on_disk != manifest.count {
        return Err(IoError::CountMismatch { path: manifest_path, expected: manifest.count, found: on_disk });
    }
    let mut samples = Vec::with_capacity(manifest.count);
    for i in 0..manifest.count {
        let meta_name = format!("{}.meta.json", stem(i));
        let meta_path = dir.join(&meta_name);
        check_version(&meta_path)?;
        let meta_bytes = read_bytes(&meta_path)?;
        verify(&manifest, &meta_path, &meta_name, &meta_bytes)?;
        let meta: SampleMeta =
            serde_json::from_slice(&meta_bytes).map_err(|source| IoError::Json { path: meta_path.clone(), source })?;
        let bin_name = format!("{}.bin", stem(i));
        let bin_path = dir.join(&bin_name);
        let expected = 4 * (meta.n_x + meta.n_t * meta.n_x) as u64;
        let raw = read_bytes(&bin_path)?;
        if raw.len() as u64 != expected {
            return Err(IoError::CorruptFile { path: bin_path, offset: (raw.len() as u64).min(expected) });
        }
        verify(&manifest, &bin_path, &bin_name, &raw)?;
        let values = f32_from_le(&raw);
        let (ic, solution) = values.split_at(meta.n_x);
        samples.push(PdeSample {
            draw: meta.draw,
            seed: meta.seed,
            coefficients: meta.coefficients,
            ic_recipe: meta.ic_recipe,
            n_x: meta.n_x,
            n_t: meta.n_t,
            dt_data: meta.dt_data,
            rejected_before: meta.rejected_before,
            ic: ic.to_vec(),
            solution: solution.to_vec(),
        });
    }
    Ok(Dataset { manifest, samples })
}
