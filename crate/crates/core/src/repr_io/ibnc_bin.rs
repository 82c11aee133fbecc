use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"IBNC";
const VERSION: u32 = 1;
const DTYPE_F64: u8 = 0;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 1;

pub(super) fn encode(features: &DMatrix<f64>, labels: &[i64]) -> Vec<u8> {
    let (n, d) = features.shape();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * n * (d + 1));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&(d as u64).to_le_bytes());
    buf.push(DTYPE_F64);
    for i in 0..n {
        for j in 0..d {
            buf.extend_from_slice(&features[(i, j)].to_le_bytes());
        }
    }
    for &l in labels {
        buf.extend_from_slice(&l.to_le_bytes());
    }
    buf
}

pub(super) fn decode(bytes: &[u8]) -> Result<(DMatrix<f64>, Vec<i64>)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format("ibnc-bin: truncated header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("ibnc-bin: bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!(
            "ibnc-bin: unsupported version {version}"
        )));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let d = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let dtype = bytes[24];
    if dtype != DTYPE_F64 {
        return Err(Error::Format(format!(
            "ibnc-bin: unsupported dtype {dtype}"
        )));
    }
    let expected = n
        .checked_mul(d.saturating_add(1))
        .and_then(|cells| cells.checked_mul(8))
        .and_then(|b| b.checked_add(HEADER_LEN as u64));
    if expected != Some(bytes.len() as u64) {
        return Err(Error::Format(format!(
            "ibnc-bin: {} bytes on disk, header declares {n} x {d}",
            bytes.len()
        )));
    }
    let (n, d) = (n as usize, d as usize);
    let body = &bytes[HEADER_LEN..];
    let mut chunks = body.chunks_exact(8);
    let values: Vec<f64> = (&mut chunks)
        .take(n * d)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let labels: Vec<i64> = chunks
        .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((DMatrix::from_row_slice(n, d, &values), labels))
}

pub(super) fn read(path: &Path) -> Result<(DMatrix<f64>, Vec<i64>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub(super) fn write(path: &Path, features: &DMatrix<f64>, labels: &[i64]) -> Result<()> {
    fs::write(path, encode(features, labels)).map_err(|e| Error::io(path, e))
}
