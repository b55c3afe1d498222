//! Binary checkpoint format, all integers little-endian:
//!
//! ```text
//! magic   8 bytes  "FIDNCKPT"
//! version u32      1
//! count   u32      number of tensors
//! per tensor:
//!   name_len u32, name (UTF-8),
//!   dtype u8 (1 = f32, 2 = f64), rank u8, dims rank x u64,
//!   data  product(dims) values of the dtype
//! ```
//!
//! Tensors are written in name order. Ranks below 4 are read with leading
//! unit dimensions.

use std::fs;
use std::path::Path;

use crate::{NnError, ParamStore, Real, Result, Tensor};

pub const MAGIC: &[u8; 8] = b"FIDNCKPT";
pub const VERSION: u32 = 1;

pub fn to_bytes<T: Real>(store: &ParamStore<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (name, t) in store.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(T::DTYPE);
        out.push(4);
        for d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            if T::DTYPE == 1 {
                out.extend_from_slice(&(v.to_f64_lossless() as f32).to_le_bytes());
            } else {
                out.extend_from_slice(&v.to_f64_lossless().to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Decodes every tensor, converting to `T`.
pub fn from_bytes<T: Real>(bytes: &[u8]) -> std::result::Result<Vec<(String, Tensor<T>)>, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|e| e.to_string())?.to_owned();
        let dtype = r.u8()?;
        let rank = r.u8()? as usize;
        if !(1..=4).contains(&rank) {
            return Err(format!("`{name}`: rank {rank} not in 1..=4"));
        }
        let mut shape = [1usize; 4];
        for i in 0..rank {
            shape[4 - rank + i] = usize::try_from(r.u64()?).map_err(|e| e.to_string())?;
        }
        let n: usize = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| format!("`{name}`: dims overflow"))?;
        let data: Vec<T> = match dtype {
            1 => r
                .take(n.checked_mul(4).ok_or("size overflow")?)?
                .chunks_exact(4)
                .map(|c| T::of(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
                .collect(),
            2 => r
                .take(n.checked_mul(8).ok_or("size overflow")?)?
                .chunks_exact(8)
                .map(|c| T::of(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
                .collect(),
            d => return Err(format!("`{name}`: unknown dtype {d}")),
        };
        out.push((name, Tensor::new(shape, data).map_err(|e| e.to_string())?));
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    Ok(out)
}

pub fn save<T: Real>(path: &Path, store: &ParamStore<T>) -> Result<()> {
    fs::write(path, to_bytes(store)).map_err(|source| NnError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Reads a checkpoint into `store`, whose names and shapes must match.
pub fn load_into<T: Real>(path: &Path, store: &mut ParamStore<T>) -> Result<()> {
    let bytes = fs::read(path).map_err(|source| NnError::Io {
        path: path.to_owned(),
        source,
    })?;
    let tensors = from_bytes(&bytes).map_err(|reason| NnError::Checkpoint {
        path: path.to_owned(),
        reason,
    })?;
    store.assign(tensors).map_err(|e| NnError::Checkpoint {
        path: path.to_owned(),
        reason: e.to_string(),
    })
}
