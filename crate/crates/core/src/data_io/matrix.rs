//! Dense matrix persistence.
//!
//! Binary layout: the 8-byte magic `OMFMAT01`, two little-endian u64
//! dimensions (rows, cols), then `rows * cols` little-endian IEEE f64
//! values in row-major order. The binary encoding round-trips bit-exactly.
//!
//! The text alternative is a `rows cols` header line followed by
//! whitespace-separated values in row-major order; the loader
//! distinguishes the two by the magic.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::float::Float;

const MAGIC: &[u8; 8] = b"OMFMAT01";

/// Writes the binary encoding.
pub fn save_matrix<F: Float>(matrix: &ndarray::ArrayView2<F>, path: &Path) -> Result<()> {
    let (rows, cols) = matrix.dim();
    let mut buf = Vec::with_capacity(16 + 8 * rows * cols + 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(rows as u64).to_le_bytes());
    buf.extend_from_slice(&(cols as u64).to_le_bytes());
    for r in 0..rows {
        for c in 0..cols {
            buf.extend_from_slice(&matrix[[r, c]].to_f64_lossy().to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Writes the text encoding with round-trip-precision decimal values.
pub fn save_matrix_text<F: Float>(matrix: &ndarray::ArrayView2<F>, path: &Path) -> Result<()> {
    let (rows, cols) = matrix.dim();
    let mut out = String::new();
    out.push_str(&format!("{rows} {cols}\n"));
    for r in 0..rows {
        let line: Vec<String> = (0..cols)
            .map(|c| format!("{:?}", matrix[[r, c]].to_f64_lossy()))
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Loads either encoding, sniffing the binary magic.
pub fn load_matrix<F: Float>(path: &Path) -> Result<Array2<F>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&bytes)
}

/// Decodes a matrix from raw bytes (either encoding). Malformed input of
/// any shape comes back as an error, never a panic.
pub fn parse_matrix<F: Float>(bytes: &[u8]) -> Result<Array2<F>> {
    if bytes.starts_with(MAGIC) {
        parse_binary(bytes)
    } else {
        let text = std::str::from_utf8(bytes)
            .map_err(|_| Error::format("matrix file", "not valid UTF-8 and no binary magic"))?;
        parse_text(text)
    }
}

fn parse_binary<F: Float>(bytes: &[u8]) -> Result<Array2<F>> {
    if bytes.len() < 24 {
        return Err(Error::format("matrix header", "file truncated"));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let count = rows
        .checked_mul(cols)
        .filter(|&n| n <= (usize::MAX as u64) / 8)
        .ok_or_else(|| Error::format("matrix header", "dimension overflow"))? as usize;
    let payload = &bytes[24..];
    if payload.len() != 8 * count {
        return Err(Error::format(
            "matrix payload",
            format!("expected {} bytes, found {}", 8 * count, payload.len()),
        ));
    }
    let mut data = Vec::with_capacity(count);
    for chunk in payload.chunks_exact(8) {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::format("matrix payload", "non-finite value"));
        }
        data.push(F::cast(v));
    }
    Array2::from_shape_vec((rows as usize, cols as usize), data)
        .map_err(|e| Error::format("matrix payload", e.to_string()))
}

fn parse_text<F: Float>(text: &str) -> Result<Array2<F>> {
    let mut tokens = text.split_whitespace();
    let rows: usize = tokens
        .next()
        .ok_or_else(|| Error::format("matrix header", "missing row count"))?
        .parse()
        .map_err(|_| Error::format("matrix header", "row count not an integer"))?;
    let cols: usize = tokens
        .next()
        .ok_or_else(|| Error::format("matrix header", "missing column count"))?
        .parse()
        .map_err(|_| Error::format("matrix header", "column count not an integer"))?;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::format("matrix header", "dimension overflow"))?;
    let mut data = Vec::with_capacity(count);
    for tok in tokens.by_ref().take(count) {
        let v: f64 = tok
            .parse()
            .map_err(|_| Error::format("matrix payload", format!("bad number {tok:?}")))?;
        if !v.is_finite() {
            return Err(Error::format("matrix payload", "non-finite value"));
        }
        data.push(F::cast(v));
    }
    if data.len() != count {
        return Err(Error::format(
            "matrix payload",
            format!("expected {count} values, found {}", data.len()),
        ));
    }
    if tokens.next().is_some() {
        return Err(Error::format("matrix payload", "trailing values"));
    }
    Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| Error::format("matrix payload", e.to_string()))
}
