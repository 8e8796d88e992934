//! Matrix files.
//!
//! CSV: header `y0,...,y{K-1}`, one row per frame. Binary: `PMAT`, a version
//! byte, little-endian `u32` T and K, then `T * K` little-endian `f64` values
//! row-major. Neither format stores class names; loaded matrices get the
//! default `PI<k>` names.

use std::fs;
use std::path::Path;

use super::ProbMatrix;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"PMAT";
const VERSION: u8 = 1;

pub fn matrix_to_bytes(m: &ProbMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + 8 * m.data().len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(m.frames() as u32).to_le_bytes());
    out.extend_from_slice(&(m.classes() as u32).to_le_bytes());
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn matrix_from_bytes(bytes: &[u8]) -> Result<ProbMatrix> {
    if bytes.len() < 13 || &bytes[..4] != MAGIC {
        return Err(Error::InvalidMatrix("bad magic, expected PMAT".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::InvalidMatrix(format!(
            "unsupported version {}",
            bytes[4]
        )));
    }
    let rows = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let body = &bytes[13..];
    if body.len() != rows * cols * 8 {
        return Err(Error::InvalidMatrix(format!(
            "expected {} value bytes for {rows}x{cols}, found {}",
            rows * cols * 8,
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ProbMatrix::new(rows, cols, data)
}

pub fn matrix_to_csv(m: &ProbMatrix) -> String {
    let mut out = (0..m.classes())
        .map(|k| format!("y{k}"))
        .collect::<Vec<_>>()
        .join(",");
    out.push('\n');
    for t in 0..m.frames() {
        let row: Vec<String> = m.row(t).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<ProbMatrix> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    for (k, h) in header.iter().enumerate() {
        if h.trim() != format!("y{k}") {
            return Err(Error::InvalidMatrix(format!(
                "header column {k} is {h:?}, expected y{k}"
            )));
        }
    }
    let cols = header.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        for field in record.iter() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Format {
                line: rows + 2,
                msg: format!("bad number {field:?}"),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    ProbMatrix::new(rows, cols, data)
}

/// Loads `.csv` files as CSV and anything else as binary.
pub fn load_matrix(path: impl AsRef<Path>) -> Result<ProbMatrix> {
    let path = path.as_ref();
    if is_csv(path) {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        matrix_from_csv(&text)
    } else {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        matrix_from_bytes(&bytes)
    }
}

pub fn save_matrix(m: &ProbMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = if is_csv(path) {
        matrix_to_csv(m).into_bytes()
    } else {
        matrix_to_bytes(m)
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}
