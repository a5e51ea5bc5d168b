use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Binary greymap, intensities clamped to `[0, 1]` and scaled to 0..=255.
pub fn pgm_bytes(img: &Array2<f64>) -> Vec<u8> {
    let (n1, n2) = img.dim();
    let mut out = format!("P5\n{n2} {n1}\n255\n").into_bytes();
    out.extend(img.iter().map(|&v| {
        let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
        (v * 255.0).round() as u8
    }));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the experiment directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverOutcome {
    pub label: String,
    pub kind: String,
    pub ok: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub crate_version: String,
    pub name: Option<String>,
    pub geometry_hash: String,
    pub cache_hit: bool,
    pub solvers: Vec<SolverOutcome>,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn all_ok(&self) -> bool {
        self.solvers.iter().all(|s| s.ok)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Paths whose current content no longer matches the recorded checksum
    /// (missing files included).
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|f| match fs::read(dir.join(&f.path)) {
                Ok(b) => sha256_hex(&b) != f.sha256 || b.len() as u64 != f.bytes,
                Err(_) => true,
            })
            .map(|f| f.path.clone())
            .collect()
    }
}

/// Checksummed entries for the given `/`-separated paths under `dir`,
/// sorted by path.
pub fn file_entries(dir: &Path, paths: &[String]) -> Result<Vec<FileEntry>> {
    let mut files = paths
        .iter()
        .map(|p| {
            let bytes = fs::read(dir.join(p))?;
            Ok(FileEntry {
                path: p.clone(),
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    files.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(files)
}
