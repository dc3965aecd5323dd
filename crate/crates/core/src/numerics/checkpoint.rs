//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "KGE1" | version: u32
//! repeated until EOF:
//!   name_len: u32 | name: utf-8 bytes | rank: u32 (= 2) | rows: u32 | cols: u32
//!   values: rows*cols f64, row-major
//! ```
//!
//! Optimizer moments and the step counter are not stored.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::params::ParameterStore;
use super::tensor::Tensor2;
use crate::error::{KgeError, Result};

pub const MAGIC: &[u8; 4] = b"KGE1";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode(store: &ParameterStore) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for (name, p) in store.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&2u32.to_le_bytes());
        out.extend_from_slice(&(p.value.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(p.value.cols() as u32).to_le_bytes());
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(KgeError::Checkpoint(format!(
                "truncated while reading {what}"
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ParameterStore> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(KgeError::Checkpoint("bad magic bytes".into()));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(KgeError::Checkpoint(format!(
            "unsupported version {version}"
        )));
    }
    let mut store = ParameterStore::new();
    while r.pos < bytes.len() {
        let len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| KgeError::Checkpoint("parameter name is not utf-8".into()))?
            .to_string();
        let rank = r.u32("rank")?;
        if rank != 2 {
            return Err(KgeError::Checkpoint(format!(
                "`{name}` has rank {rank}, expected 2"
            )));
        }
        let rows = r.u32("rows")? as usize;
        let cols = r.u32("cols")? as usize;
        let raw = r.take(rows * cols * 8, "values")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if store.contains(&name) {
            return Err(KgeError::Checkpoint(format!(
                "duplicate parameter `{name}`"
            )));
        }
        store.insert(name, Tensor2::from_vec(rows, cols, data)?);
    }
    Ok(store)
}

pub fn save(store: &ParameterStore, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| KgeError::io(path, e))?;
    f.write_all(&encode(store))
        .map_err(|e| KgeError::io(path, e))
}

pub fn load(path: &Path) -> Result<ParameterStore> {
    let bytes = fs::read(path).map_err(|e| KgeError::io(path, e))?;
    decode(&bytes)
}
