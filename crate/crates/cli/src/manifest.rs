use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use argon::autograd::write_atomic;
use argon::vib::TrainConfig;
use argon::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Index of everything an experiment directory holds.
///
/// Paths are relative to the experiment directory and use `/` separators.
/// `hashes` maps every recorded file to its SHA-256.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub corpus: Option<String>,
    pub attributes: Option<String>,
    /// Attribute name to transform parameter file.
    pub transforms: BTreeMap<String, String>,
    /// Run name to checkpoint directory.
    pub checkpoints: BTreeMap<String, String>,
    /// Run name to training configuration.
    pub train_configs: BTreeMap<String, TrainConfig>,
    /// Run name to results CSV.
    pub results: BTreeMap<String, String>,
    pub hashes: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl ExperimentManifest {
    /// Loads the manifest in `dir`, or an empty one if there is none, and
    /// checks every recorded hash.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        if !path.exists() {
            return Ok(Self::default());
        }
        let m: Self = serde_json::from_slice(&fs::read(&path)?)?;
        m.verify(dir)?;
        Ok(m)
    }

    pub fn verify(&self, dir: &Path) -> Result<()> {
        for (rel, want) in &self.hashes {
            let bytes = fs::read(dir.join(rel))
                .map_err(|e| Error::Format(format!("{rel} listed in manifest but unreadable: {e}")))?;
            if &sha256_hex(&bytes) != want {
                return Err(Error::Format(format!("{rel} does not match its manifest hash")));
            }
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_atomic(&dir.join(MANIFEST_NAME), text.as_bytes())
    }

    /// Records the hash of a file, or of every file under a directory.
    pub fn record(&mut self, dir: &Path, rel: &str) -> Result<()> {
        let full = dir.join(rel);
        if full.is_dir() {
            let prefix = format!("{rel}/");
            self.hashes.retain(|k, _| !k.starts_with(&prefix));
            let mut names: Vec<PathBuf> = fs::read_dir(&full)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
            names.sort();
            for p in names.iter().filter(|p| p.is_file()) {
                let name = p.file_name().and_then(|n| n.to_str()).ok_or_else(|| Error::Format(format!("bad file name {}", p.display())))?;
                self.hashes.insert(format!("{rel}/{name}"), sha256_hex(&fs::read(p)?));
            }
        } else {
            self.hashes.insert(rel.to_string(), sha256_hex(&fs::read(&full)?));
        }
        Ok(())
    }
}
