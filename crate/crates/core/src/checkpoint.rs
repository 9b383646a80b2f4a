//! Checkpoint container: named f64 tensors in a little-endian binary file
//! next to a JSON manifest.
//!
//! ```text
//! "HSECKPT1" | u32 count | count × (u32 name_len | name | u32 ndim | ndim × u64 | f64 values)
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::TagTaxonomy;
use crate::corpus::{sha256_hex, write_atomic, RunConfig};
use crate::error::{Error, Result};
use crate::tensor::{ParamStore, Tensor};

pub const MAGIC: &[u8; 8] = b"HSECKPT1";
pub const PARAMS_FILE: &str = "params.bin";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn encode(store: &ParamStore) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + store.total_values() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (name, t) in store.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let count = r.u32()?;
    let mut out = Vec::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| Error::Checkpoint("name is not UTF-8".into()))?;
        let ndim = r.u32()? as usize;
        let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let data = r
            .take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(out)
}

/// Copy decoded values into a store with the same names and shapes.
pub fn restore(store: &mut ParamStore, entries: &[(String, Tensor)]) -> Result<()> {
    if entries.len() != store.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} tensors, model has {}",
            entries.len(),
            store.len()
        )));
    }
    for (name, t) in entries {
        let id = store
            .find(name)
            .ok_or_else(|| Error::Checkpoint(format!("unexpected tensor {name}")))?;
        if store.value(id).shape() != t.shape() {
            return Err(Error::Checkpoint(format!(
                "{name}: shape {:?} in checkpoint, {:?} in model",
                t.shape(),
                store.value(id).shape()
            )));
        }
        *store.value_mut(id) = t.clone();
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointKind {
    Tagger,
    Logline,
    Descriptor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: CheckpointKind,
    pub seed: u64,
    pub config_hash: String,
    pub vocab_hash: String,
    pub params_sha256: String,
    pub config: RunConfig,
    pub taxonomy: Option<TagTaxonomy>,
    pub characters: Vec<String>,
    pub best_epoch: Option<usize>,
}

/// Write `params.bin` and `manifest.json` into `dir`. The manifest's
/// parameter digest is filled in here.
pub fn save(dir: &Path, store: &ParamStore, mut manifest: Manifest) -> Result<Manifest> {
    let bytes = encode(store);
    manifest.params_sha256 = sha256_hex(&bytes);
    write_atomic(&dir.join(PARAMS_FILE), &bytes)?;
    write_atomic(&dir.join(MANIFEST_FILE), (serde_json::to_string_pretty(&manifest)? + "\n").as_bytes())?;
    Ok(manifest)
}

pub fn load(dir: &Path) -> Result<(Manifest, Vec<(String, Tensor)>)> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let ppath = dir.join(PARAMS_FILE);
    let bytes = std::fs::read(&ppath).map_err(|e| Error::io(&ppath, e))?;
    if sha256_hex(&bytes) != manifest.params_sha256 {
        return Err(Error::Checkpoint("parameter file digest does not match manifest".into()));
    }
    Ok((manifest, decode(&bytes)?))
}
