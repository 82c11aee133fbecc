//! Minimal reader/writer for `.npy` arrays (version 1.0 written; 1.x-3.x read).

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
struct Header {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

fn format_shape(shape: &[usize]) -> String {
    match shape {
        [n] => format!("({n},)"),
        dims => format!(
            "({})",
            dims.iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

fn encode_header(descr: &str, shape: &[usize]) -> Vec<u8> {
    let mut dict = format!(
        "{{'descr': '{descr}', 'fortran_order': False, 'shape': {}, }}",
        format_shape(shape)
    );
    // magic(6) + version(2) + len(2) + dict + '\n' must be a multiple of ALIGN
    let unpadded = MAGIC.len() + 2 + 2 + dict.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    dict.extend(std::iter::repeat_n(' ', pad));
    dict.push('\n');

    let mut out = Vec::with_capacity(unpadded + pad);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out
}

fn dict_value<'a>(dict: &'a str, key: &str) -> Result<&'a str> {
    let pat = format!("'{key}'");
    let start = dict
        .find(&pat)
        .ok_or_else(|| Error::Format(format!("npy: header lacks `{key}`")))?;
    let rest = dict[start + pat.len()..].trim_start();
    let rest = rest
        .strip_prefix(':')
        .ok_or_else(|| Error::Format("npy: malformed header dict".into()))?
        .trim_start();
    Ok(rest)
}

fn parse_header(dict: &str) -> Result<Header> {
    let descr_rest = dict_value(dict, "descr")?;
    let quote = descr_rest
        .chars()
        .next()
        .filter(|c| *c == '\'' || *c == '"')
        .ok_or_else(|| Error::Format("npy: descr is not a string".into()))?;
    let descr_end = descr_rest[1..]
        .find(quote)
        .ok_or_else(|| Error::Format("npy: unterminated descr".into()))?;
    let descr = descr_rest[1..1 + descr_end].to_string();

    let fo_rest = dict_value(dict, "fortran_order")?;
    let fortran_order = if fo_rest.starts_with("True") {
        true
    } else if fo_rest.starts_with("False") {
        false
    } else {
        return Err(Error::Format("npy: fortran_order is not a bool".into()));
    };

    let shape_rest = dict_value(dict, "shape")?;
    let shape_rest = shape_rest
        .strip_prefix('(')
        .ok_or_else(|| Error::Format("npy: shape is not a tuple".into()))?;
    let close = shape_rest
        .find(')')
        .ok_or_else(|| Error::Format("npy: unterminated shape".into()))?;
    let shape = shape_rest[..close]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::Format(format!("npy: bad shape entry `{s}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Header {
        descr,
        fortran_order,
        shape,
    })
}

fn decode(bytes: &[u8]) -> Result<(Header, &[u8])> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::Format("npy: bad magic".into()));
    }
    let major = bytes[6];
    let (header_len, offset) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(Error::Format("npy: truncated header".into()));
            }
            (
                u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize,
                12,
            )
        }
        v => return Err(Error::Format(format!("npy: unsupported version {v}"))),
    };
    let end = offset + header_len;
    if bytes.len() < end {
        return Err(Error::Format("npy: truncated header".into()));
    }
    let dict = std::str::from_utf8(&bytes[offset..end])
        .map_err(|_| Error::Format("npy: header is not text".into()))?;
    Ok((parse_header(dict)?, &bytes[end..]))
}

fn check_len(body: &[u8], count: usize, width: usize) -> Result<()> {
    if body.len() != count * width {
        return Err(Error::Format(format!(
            "npy: {} data bytes, expected {}",
            body.len(),
            count * width
        )));
    }
    Ok(())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Reads a 2-D float array (`<f8` or `<f4`) as an `N x d` matrix.
pub fn read_npy_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let bytes = read_file(path)?;
    with_path(path, decode_matrix(&bytes))
}

fn decode_matrix(bytes: &[u8]) -> Result<DMatrix<f64>> {
    let (header, body) = decode(bytes)?;
    let (n, d) = match header.shape[..] {
        [n, d] => (n, d),
        [n] => (n, 1),
        _ => {
            return Err(Error::Format(format!(
                "npy: expected a 2-D array, got shape {:?}",
                header.shape
            )))
        }
    };
    let values: Vec<f64> = match header.descr.as_str() {
        "<f8" => {
            check_len(body, n * d, 8)?;
            body.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect()
        }
        "<f4" => {
            check_len(body, n * d, 4)?;
            body.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect()
        }
        other => {
            return Err(Error::Format(format!(
                "npy: unsupported feature dtype `{other}`"
            )))
        }
    };
    Ok(if header.fortran_order {
        DMatrix::from_column_slice(n, d, &values)
    } else {
        DMatrix::from_row_slice(n, d, &values)
    })
}

/// Reads a 1-D integer array (`<i8`, or `<i4`).
pub fn read_npy_labels(path: &Path) -> Result<Vec<i64>> {
    let bytes = read_file(path)?;
    with_path(path, decode_labels(&bytes))
}

fn decode_labels(bytes: &[u8]) -> Result<Vec<i64>> {
    let (header, body) = decode(bytes)?;
    let n = match header.shape[..] {
        [n] => n,
        [n, 1] => n,
        _ => {
            return Err(Error::Format(format!(
                "npy: expected a 1-D label array, got shape {:?}",
                header.shape
            )))
        }
    };
    match header.descr.as_str() {
        "<i8" => {
            check_len(body, n, 8)?;
            Ok(body
                .chunks_exact(8)
                .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        }
        "<i4" => {
            check_len(body, n, 4)?;
            Ok(body
                .chunks_exact(4)
                .map(|c| i32::from_le_bytes(c.try_into().unwrap()) as i64)
                .collect())
        }
        other => Err(Error::Format(format!(
            "npy: unsupported label dtype `{other}`"
        ))),
    }
}

pub fn write_npy_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let (n, d) = m.shape();
    let mut out = encode_header("<f8", &[n, d]);
    out.reserve(8 * n * d);
    for i in 0..n {
        for j in 0..d {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_npy_labels(path: &Path, labels: &[i64]) -> Result<()> {
    let mut out = encode_header("<i8", &[labels.len()]);
    for l in labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
