//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "SKRESCKP"
//! version  u32
//! n_meta   u32, then n_meta x (key: str, value: str)
//! n_entry  u32, then n_entry x entry
//! entry    kind u8 (0 parameter, 1 running statistic), name: str,
//!          ndim u32, ndim x u64 dims, prod(dims) x f64 values
//! str      u32 byte length, UTF-8 bytes
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SKRESCKP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    Parameter,
    RunningStat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointEntry {
    pub name: String,
    pub kind: EntryKind,
    pub tensor: Tensor,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub entries: Vec<CheckpointEntry>,
}

fn ckpt_err(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| ckpt_err(format!("truncated: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| ckpt_err(format!("truncated: {e}")))?;
    Ok(u64::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(ckpt_err(format!("implausible string length {len}")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(|e| ckpt_err(format!("truncated: {e}")))?;
    String::from_utf8(buf).map_err(|e| ckpt_err(e.to_string()))
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.meta.len() as u32).to_le_bytes())?;
        for (k, v) in &self.meta {
            write_str(&mut w, k)?;
            write_str(&mut w, v)?;
        }
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for e in &self.entries {
            w.write_all(&[match e.kind {
                EntryKind::Parameter => 0,
                EntryKind::RunningStat => 1,
            }])?;
            write_str(&mut w, &e.name)?;
            w.write_all(&(e.tensor.shape().len() as u32).to_le_bytes())?;
            for &d in e.tensor.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in e.tensor.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|e| ckpt_err(format!("truncated header: {e}")))?;
        if &magic != MAGIC {
            return Err(ckpt_err("not a checkpoint file (bad magic)"));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(ckpt_err(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let mut meta = BTreeMap::new();
        for _ in 0..read_u32(&mut r)? {
            let k = read_str(&mut r)?;
            let v = read_str(&mut r)?;
            meta.insert(k, v);
        }
        let n = read_u32(&mut r)?;
        let mut entries = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let mut kind = [0u8; 1];
            r.read_exact(&mut kind)
                .map_err(|e| ckpt_err(format!("truncated: {e}")))?;
            let kind = match kind[0] {
                0 => EntryKind::Parameter,
                1 => EntryKind::RunningStat,
                k => return Err(ckpt_err(format!("unknown entry kind {k}"))),
            };
            let name = read_str(&mut r)?;
            let ndim = read_u32(&mut r)? as usize;
            if ndim > 8 {
                return Err(ckpt_err(format!("{name}: implausible rank {ndim}")));
            }
            let shape = (0..ndim)
                .map(|_| read_u64(&mut r).map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let count: usize = shape.iter().product();
            let mut bytes = vec![0u8; count * 8];
            r.read_exact(&mut bytes)
                .map_err(|e| ckpt_err(format!("{name}: truncated values: {e}")))?;
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            let tensor = Tensor::new(&shape, data).map_err(|e| ckpt_err(format!("{name}: {e}")))?;
            entries.push(CheckpointEntry { name, kind, tensor });
        }
        Ok(Self { meta, entries })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::harness::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(bytes.as_slice())
    }
}
