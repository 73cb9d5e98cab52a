//! TNSR tensor files.
//!
//! Layout: magic `TNSR`, format version (u16 LE), dtype code (u8, 0 = f32),
//! rank (u8), `rank` dims (u32 LE each), then the row-major f32 LE payload.

use std::fs;
use std::path::Path;

use relbench_core::Tensor;

use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TNSR";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 0;

pub fn encode(t: &Tensor) -> Result<Vec<u8>> {
    let rank = u8::try_from(t.dims().len())
        .map_err(|_| Error::MalformedHeader(format!("rank {} does not fit in a byte", t.dims().len())))?;
    let mut out = Vec::with_capacity(8 + 4 * t.dims().len() + 4 * t.numel());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(DTYPE_F32);
    out.push(rank);
    for &d in t.dims() {
        let d = u32::try_from(d).map_err(|_| Error::MalformedHeader(format!("dim {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    let bad = |m: &str| Error::MalformedHeader(m.to_string());
    if bytes.len() < 8 {
        return Err(bad("file shorter than the fixed header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("missing TNSR magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::MalformedHeader(format!("unsupported version {version}")));
    }
    if bytes[6] != DTYPE_F32 {
        return Err(Error::MalformedHeader(format!("unsupported dtype code {}", bytes[6])));
    }
    let rank = bytes[7] as usize;
    let header = 8 + 4 * rank;
    if bytes.len() < header {
        return Err(bad("header truncated inside the dims"));
    }
    let dims: Vec<usize> = bytes[8..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let payload = &bytes[header..];
    if !payload.len().is_multiple_of(4) {
        return Err(relbench_core::Error::DimMismatch(format!(
            "payload of {} bytes is not a whole number of f32 values",
            payload.len()
        ))
        .into());
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Tensor::new(dims, data)?)
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn save_tensor(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(t)?).map_err(|e| Error::io(path, e))
}
