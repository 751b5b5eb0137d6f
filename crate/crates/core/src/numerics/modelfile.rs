//! Versioned binary parameter files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes   "KGWMODEL"
//! version    u32       currently 1
//! kind       u32 len + UTF-8 bytes        ("writer", "link", ...)
//! metadata   u64 len + UTF-8 JSON         (dimensions, vocabularies)
//! count      u32                          number of tensors
//! per tensor:
//!   name     u32 len + UTF-8 bytes
//!   ndim     u32
//!   dims     ndim × u64
//!   data     prod(dims) × f64
//! ```
//!
//! The tensor names and shapes form the field manifest; readers check them
//! against the parameters they expect.

use std::io::{Read, Write};

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"KGWMODEL";
pub const MODEL_VERSION: u32 = 1;

pub fn write_model_file<W: Write>(
    out: &mut W,
    kind: &str,
    metadata: &str,
    store: &ParamStore,
) -> std::io::Result<()> {
    out.write_all(MODEL_MAGIC)?;
    out.write_all(&MODEL_VERSION.to_le_bytes())?;
    out.write_all(&(kind.len() as u32).to_le_bytes())?;
    out.write_all(kind.as_bytes())?;
    out.write_all(&(metadata.len() as u64).to_le_bytes())?;
    out.write_all(metadata.as_bytes())?;
    out.write_all(&(store.len() as u32).to_le_bytes())?;
    for (_, name, t) in store.iter() {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.len() * 8);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, n: usize) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)
        .map_err(|e| Error::ModelFormat(format!("truncated file: {e}")))?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact(r, 4)?.try_into().unwrap()))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact(r, 8)?.try_into().unwrap()))
}

fn read_string<R: Read>(r: &mut R, len: usize) -> Result<String> {
    String::from_utf8(read_exact(r, len)?)
        .map_err(|_| Error::ModelFormat("invalid UTF-8 in header".into()))
}

/// Returns `(metadata JSON, parameters)` after checking magic, version and
/// kind.
pub fn read_model_file<R: Read>(input: &mut R, expected_kind: &str) -> Result<(String, ParamStore)> {
    let magic = read_exact(input, 8)?;
    if magic != MODEL_MAGIC {
        return Err(Error::ModelFormat("bad magic bytes".into()));
    }
    let version = read_u32(input)?;
    if version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {version}")));
    }
    let kind_len = read_u32(input)? as usize;
    let kind = read_string(input, kind_len)?;
    if kind != expected_kind {
        return Err(Error::ModelFormat(format!(
            "expected a {expected_kind} model, found {kind}"
        )));
    }
    let meta_len = read_u64(input)? as usize;
    let metadata = read_string(input, meta_len)?;
    let count = read_u32(input)? as usize;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let name_len = read_u32(input)? as usize;
        let name = read_string(input, name_len)?;
        let ndim = read_u32(input)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(read_u64(input)? as usize);
        }
        let n: usize = shape.iter().product();
        let bytes = read_exact(input, n * 8)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        store.add(name, Tensor::new(shape, data)?);
    }
    Ok((metadata, store))
}
