//! Dense feature files.
//!
//! Binary layout, all integers little-endian:
//!
//! | bytes | content                                  |
//! |-------|------------------------------------------|
//! | 8     | magic `H2SGFEAT`                         |
//! | 4     | dtype: 1 = f32, 2 = f64                  |
//! | 4     | ndim, always 2                           |
//! | 8     | rows                                     |
//! | 8     | cols                                     |
//! | rest  | rows * cols values, row-major            |
//!
//! The TSV fallback has one row per line, values separated by tabs.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::DenseMatrix;

pub const MAGIC: &[u8; 8] = b"H2SGFEAT";
pub const DTYPE_F32: u32 = 1;
pub const DTYPE_F64: u32 = 2;
const HEADER_LEN: usize = 32;

fn format_err(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("{}: {msg}", path.display()))
}

pub fn decode_binary(bytes: &[u8], path: &Path) -> Result<DenseMatrix> {
    if bytes.len() < HEADER_LEN {
        return Err(format_err(path, "truncated header"));
    }
    if &bytes[..8] != MAGIC {
        return Err(format_err(path, "bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let dtype = u32_at(8);
    let ndim = u32_at(12);
    if ndim != 2 {
        return Err(format_err(path, format!("ndim {ndim}, expected 2")));
    }
    let rows = usize::try_from(u64_at(16)).map_err(|e| format_err(path, e))?;
    let cols = usize::try_from(u64_at(24)).map_err(|e| format_err(path, e))?;
    let width = match dtype {
        DTYPE_F32 => 4,
        DTYPE_F64 => 8,
        other => return Err(format_err(path, format!("unsupported dtype {other}"))),
    };
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| format_err(path, "shape overflows"))?;
    let body = &bytes[HEADER_LEN..];
    if Some(body.len()) != count.checked_mul(width) {
        return Err(format_err(
            path,
            format!(
                "{} payload bytes for a {rows}x{cols} matrix of {width}-byte values",
                body.len()
            ),
        ));
    }
    let data: Vec<f64> = if dtype == DTYPE_F32 {
        body.chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect()
    } else {
        body.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    DenseMatrix::from_vec(rows, cols, data)
}

/// Encodes as f32 when every value survives the conversion exactly,
/// otherwise as f64.
pub fn encode_binary(m: &DenseMatrix) -> Vec<u8> {
    let exact_f32 = m.data().iter().all(|&v| (v as f32) as f64 == v || v.is_nan());
    let dtype = if exact_f32 { DTYPE_F32 } else { DTYPE_F64 };
    let width = if exact_f32 { 4 } else { 8 };
    let mut out = Vec::with_capacity(HEADER_LEN + m.data().len() * width);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&dtype.to_le_bytes());
    out.extend_from_slice(&2u32.to_le_bytes());
    out.extend_from_slice(&(m.n_rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.n_cols() as u64).to_le_bytes());
    for &v in m.data() {
        if exact_f32 {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        } else {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn parse_tsv(text: &str, path: &Path) -> Result<DenseMatrix> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.split('\t') {
            let v: f64 = field.trim().parse().map_err(|_| Error::Validation {
                path: path.to_path_buf(),
                line: ln + 1,
                msg: format!("`{field}` is not a number"),
            })?;
            data.push(v);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::Validation {
                    path: path.to_path_buf(),
                    line: ln + 1,
                    msg: format!("{width} values, previous rows have {c}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    DenseMatrix::from_vec(rows, cols.unwrap_or(0), data)
}

pub fn to_tsv(m: &DenseMatrix) -> String {
    let mut s = String::new();
    for row in m.rows() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&fields.join("\t"));
        s.push('\n');
    }
    s
}

fn is_tsv(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("tsv" | "txt")
    )
}

/// Reads a feature file, choosing the TSV parser for `.tsv`/`.txt`
/// extensions and the binary decoder otherwise.
pub fn read_features(path: &Path) -> Result<DenseMatrix> {
    if is_tsv(path) {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_tsv(&text, path)
    } else {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        decode_binary(&bytes, path)
    }
}

pub fn write_features(path: &Path, m: &DenseMatrix) -> Result<()> {
    let bytes = if is_tsv(path) {
        to_tsv(m).into_bytes()
    } else {
        encode_binary(m)
    };
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}
