//! Binary parameter checkpoints.
//!
//! Layout: the 8-byte magic `MPCKPT01`, a little-endian `u64` manifest
//! length, the UTF-8 JSON manifest, then every block's values as
//! little-endian `f64` in manifest order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MPCKPT01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub seed: u64,
    pub step: u64,
    /// Free-form architecture description (dims, joint count, variant).
    pub arch: serde_json::Value,
    pub blocks: Vec<BlockEntry>,
}

pub fn to_bytes(store: &ParamStore, seed: u64, step: u64, arch: serde_json::Value) -> Vec<u8> {
    let manifest = CheckpointManifest {
        seed,
        step,
        arch,
        blocks: store
            .blocks()
            .iter()
            .map(|b| BlockEntry { name: b.name.clone(), rows: b.rows, cols: b.cols })
            .collect(),
    };
    let text = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut out = Vec::with_capacity(16 + text.len() + store.num_scalars() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(text.len() as u64).to_le_bytes());
    out.extend_from_slice(&text);
    for b in store.blocks() {
        for v in &b.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<(CheckpointManifest, ParamStore)> {
    let bad = |m: &str| Error::Format(format!("checkpoint: {m}"));
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing magic header"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = bytes.get(16..16 + len).ok_or_else(|| bad("truncated manifest"))?;
    let manifest: CheckpointManifest = serde_json::from_slice(body).map_err(|e| bad(&e.to_string()))?;
    let mut off = 16 + len;
    let mut store = ParamStore::new();
    for entry in &manifest.blocks {
        let n = entry.rows * entry.cols;
        let raw = bytes.get(off..off + n * 8).ok_or_else(|| bad("truncated values"))?;
        let values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        store.add(entry.name.clone(), entry.rows, entry.cols, values);
        off += n * 8;
    }
    if off != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok((manifest, store))
}

pub fn save(path: &Path, store: &ParamStore, seed: u64, step: u64, arch: serde_json::Value) -> Result<()> {
    std::fs::write(path, to_bytes(store, seed, step, arch))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(CheckpointManifest, ParamStore)> {
    from_bytes(&std::fs::read(path)?)
}
