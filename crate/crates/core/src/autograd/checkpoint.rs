//! Parameter checkpoints: a flat little-endian binary of all arrays plus a
//! JSON manifest listing names, shapes and byte offsets.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::params::ParamStore;
use super::tensor::Tensor;

pub const PARAMS_FILE: &str = "params.bin";
pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: [usize; 2],
    pub offset: usize,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub dtype: String,
    pub entries: Vec<ManifestEntry>,
    /// Free-form model description stored alongside the arrays.
    #[serde(default)]
    pub metadata: serde_json::Value,
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Saves `store` into directory `dir`.
pub fn save_checkpoint<T: Scalar>(dir: &Path, store: &ParamStore<T>, metadata: serde_json::Value) -> Result<CheckpointManifest> {
    let mut blob = Vec::with_capacity(store.element_count() * T::BYTES);
    let mut entries = Vec::with_capacity(store.len());
    for (name, t) in store.names().iter().zip(store.tensors()) {
        if !t.is_finite() {
            return Err(Error::NonFinite(format!("parameter {name} has non-finite values")));
        }
        let offset = blob.len();
        t.data().iter().for_each(|&x| x.write_le(&mut blob));
        entries.push(ManifestEntry { name: name.clone(), shape: t.shape(), offset, bytes: blob.len() - offset });
    }
    let manifest = CheckpointManifest { format_version: FORMAT_VERSION, dtype: T::DTYPE.to_string(), entries, metadata };
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join(PARAMS_FILE), &blob)?;
    write_atomic(&dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<CheckpointManifest> {
    let manifest: CheckpointManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {}", manifest.format_version)));
    }
    Ok(manifest)
}

/// Loads a checkpoint written by [`save_checkpoint`] with the same scalar type.
pub fn load_checkpoint<T: Scalar>(dir: &Path) -> Result<(ParamStore<T>, CheckpointManifest)> {
    let manifest = read_manifest(dir)?;
    if manifest.dtype != T::DTYPE {
        return Err(Error::Format(format!("checkpoint holds {}, expected {}", manifest.dtype, T::DTYPE)));
    }
    let blob = fs::read(dir.join(PARAMS_FILE))?;
    let mut store = ParamStore::new();
    for e in &manifest.entries {
        let count = e.shape[0] * e.shape[1];
        if e.bytes != count * T::BYTES || e.offset + e.bytes > blob.len() {
            return Err(Error::Format(format!("entry {} does not fit the parameter file", e.name)));
        }
        let data = blob[e.offset..e.offset + e.bytes].chunks_exact(T::BYTES).map(T::read_le).collect();
        store.add(e.name.clone(), Tensor::new(e.shape[0], e.shape[1], data)?)?;
    }
    Ok((store, manifest))
}
