//! Matrix files.
//!
//! * CSV: one row per line, comma separated decimals, no header.
//! * Binary: magic `SKDM`, `u64` rows, `u64` cols (little endian), then
//!   `rows * cols` little-endian `f64` entries in row-major order.

use super::ensure_finite;
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"SKDM";

pub fn write_binary<W: Write>(mut w: W, a: &DMatrix<f64>) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(a.nrows() as u64).to_le_bytes())?;
    w.write_all(&(a.ncols() as u64).to_le_bytes())?;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            w.write_all(&a[(i, j)].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<DMatrix<f64>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Parse("missing SKDM magic".into()));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Parse("dimensions overflow".into()))?;
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let a = DMatrix::from_row_slice(rows, cols, &data);
    ensure_finite(&a)?;
    Ok(a)
}

pub fn write_csv<W: Write>(mut w: W, a: &DMatrix<f64>) -> Result<()> {
    for i in 0..a.nrows() {
        let line: Vec<String> = (0..a.ncols()).map(|j| a[(i, j)].to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|e| {
                    Error::Parse(format!("line {}: {:?}: {e}", lineno + 1, t.trim()))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse(format!(
                    "line {} has {} fields, expected {}",
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let a = DMatrix::from_row_slice(nrows, ncols, &flat);
    ensure_finite(&a)?;
    Ok(a)
}

/// Reads either format, sniffing the binary magic.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let mut f = BufReader::new(File::open(path)?);
    let head = f.fill_buf()?;
    if head.starts_with(MAGIC) {
        read_binary(f)
    } else {
        read_csv(f)
    }
}

/// Writes CSV when the path ends in `.csv`, binary otherwise.
pub fn write_matrix(path: impl AsRef<Path>, a: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let w = BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        write_csv(w, a)
    } else {
        write_binary(w, a)
    }
}
