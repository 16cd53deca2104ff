//! Per-basis constants shared between evaluations and persisted between runs.

use crate::lattice::LatticeBasis;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::RwLock;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisConstants {
    pub normalization: f64,
    pub robin: f64,
}

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("cache file is not valid JSON: {0}")]
    Format(#[from] serde_json::Error),
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    version: String,
    entries: BTreeMap<String, BasisConstants>,
}

/// Concurrent map from a rounded basis key to its constants. Lookups take a
/// shared lock only; inserts are serialized behind the write lock.
#[derive(Debug, Default)]
pub struct ConstantCache {
    entries: RwLock<BTreeMap<String, BasisConstants>>,
}

fn round14(x: f64) -> f64 {
    let r = (x * 1e14).round() / 1e14;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl ConstantCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Key built from `(ω₁, ω₂)` rounded to 1e-14.
    pub fn key(basis: &LatticeBasis) -> String {
        let (a, b) = (basis.omega1(), basis.omega2());
        format!(
            "{:.14e},{:.14e},{:.14e},{:.14e}",
            round14(a.re),
            round14(a.im),
            round14(b.re),
            round14(b.im)
        )
    }

    pub fn get(&self, basis: &LatticeBasis) -> Option<BasisConstants> {
        self.entries.read().expect("cache lock poisoned").get(&Self::key(basis)).copied()
    }

    pub fn get_or_insert_with<F: FnOnce() -> BasisConstants>(&self, basis: &LatticeBasis, make: F) -> BasisConstants {
        if let Some(c) = self.get(basis) {
            return c;
        }
        let value = make();
        let mut map = self.entries.write().expect("cache lock poisoned");
        *map.entry(Self::key(basis)).or_insert(value)
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Load `path`; a missing file or one written by another version yields an empty cache.
    pub fn load(path: &Path, version: &str) -> Result<Self, CacheError> {
        if !path.exists() {
            return Ok(Self::new());
        }
        let text = std::fs::read_to_string(path)?;
        let file: CacheFile = serde_json::from_str(&text)?;
        if file.version != version {
            return Ok(Self::new());
        }
        Ok(Self { entries: RwLock::new(file.entries) })
    }

    pub fn save(&self, path: &Path, version: &str) -> Result<(), CacheError> {
        let entries = self.entries.read().expect("cache lock poisoned").clone();
        let file = CacheFile { version: version.to_string(), entries };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(&file)?)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }
}
