//! Binary container of named parameter arrays.
//!
//! Layout: 8-byte magic, 1 version byte, then zero or more entries until EOF.
//! Each entry is `u32` name length, UTF-8 name bytes, `u32` rank, `rank`
//! `u32` extents and the row-major `f32` values. All integers and floats are
//! little-endian.

use std::fs;
use std::path::Path;

use super::{ParameterStore, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"GCMCKPT\0";
pub const VERSION: u8 = 1;

pub fn encode(store: &ParameterStore) -> Vec<u8> {
    let mut out = Vec::with_capacity(9 + store.numel() * 4);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    for (name, t) in store.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &e in t.shape() {
            out.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for &v in t.data() {
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
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ParameterStore> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.take(1)?[0];
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", version)));
    }
    let mut store = ParameterStore::new();
    while r.pos < bytes.len() {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|e| Error::Checkpoint(format!("parameter name: {}", e)))?
            .to_string();
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let raw = r.take(n * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        store.insert(name, Tensor::new(shape, data)?)?;
    }
    Ok(store)
}

pub fn save(store: &ParameterStore, path: &Path) -> Result<()> {
    let tmp = path.with_extension("ckpt.tmp");
    fs::write(&tmp, encode(store)).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ParameterStore> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
