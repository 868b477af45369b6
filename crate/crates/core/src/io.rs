//! LLF1 field files.
//!
//! Layout: 4-byte magic "LLF1", u32 LE version, u64 LE header length (16 bytes
//! total), then a JSON header (dim, n_nodes, lower, upper, kind, payload byte
//! count), then the payload: little-endian f64, row-major with axis 0 slowest,
//! complex values interleaved (re, im). Readers reject wrong magic/version and
//! truncated payloads.

use crate::error::{CoreError, Result};
use crate::grid::{ComplexField, Grid, ScalarField};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: [u8; 4] = *b"LLF1";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dim: usize,
    n_nodes: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    kind: ValueKind,
    payload_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Real,
    Complex,
}

pub enum Field {
    Real(ScalarField),
    Complex(ComplexField),
}

fn header_for(grid: &Grid, kind: ValueKind) -> Header {
    let d = grid.dim();
    let per_value = match kind {
        ValueKind::Real => 8,
        ValueKind::Complex => 16,
    };
    Header {
        dim: d,
        n_nodes: (0..d).map(|a| grid.n_nodes(a)).collect(),
        lower: (0..d).map(|a| grid.lower(a)).collect(),
        upper: (0..d).map(|a| grid.upper(a)).collect(),
        kind,
        payload_bytes: (grid.len() * per_value) as u64,
    }
}

fn grid_from_header(h: &Header) -> Result<Grid> {
    let bad = |msg: String| CoreError::Format(msg);
    match h.dim {
        1 => {
            if h.n_nodes.len() != 1 || h.lower.len() != 1 || h.upper.len() != 1 {
                return Err(bad("1d header with wrong-length axis lists".into()));
            }
            Grid::line(h.lower[0], h.upper[0], h.n_nodes[0])
        }
        2 => {
            if h.n_nodes.len() != 2 || h.lower.len() != 2 || h.upper.len() != 2 {
                return Err(bad("2d header with wrong-length axis lists".into()));
            }
            Grid::rect(
                [h.lower[0], h.lower[1]],
                [h.upper[0], h.upper[1]],
                [h.n_nodes[0], h.n_nodes[1]],
            )
        }
        d => Err(bad(format!("unsupported dim {d}"))),
    }
}

/// Writes through a temp file in the target directory, then renames, so a
/// crash never leaves a half-written artifact under the final name.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let stem = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "artifact".into());
    let tmp_path = dir.join(format!(".{stem}.tmp"));
    {
        let mut w = BufWriter::new(File::create(&tmp_path)?);
        write(&mut w)?;
        w.flush()?;
    }
    std::fs::rename(&tmp_path, path)?;
    Ok(())
}

fn write_field(path: &Path, grid: &Grid, kind: ValueKind, payload: &[f64]) -> Result<()> {
    let header = header_for(grid, kind);
    let json = serde_json::to_vec(&header).map_err(|e| CoreError::Format(e.to_string()))?;
    write_atomic(path, |w| {
        w.write_all(&MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for v in payload {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    })
}

pub fn write_scalar(path: &Path, field: &ScalarField) -> Result<()> {
    write_field(path, field.grid(), ValueKind::Real, field.values())
}

pub fn write_complex(path: &Path, field: &ComplexField) -> Result<()> {
    let mut payload = Vec::with_capacity(field.values().len() * 2);
    for v in field.values() {
        payload.push(v.re);
        payload.push(v.im);
    }
    write_field(path, field.grid(), ValueKind::Complex, &payload)
}

pub fn read(path: &Path) -> Result<Field> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(CoreError::Format(format!("bad magic {magic:?}")));
    }
    let mut ver = [0u8; 4];
    r.read_exact(&mut ver)?;
    let version = u32::from_le_bytes(ver);
    if version != VERSION {
        return Err(CoreError::Format(format!("unsupported version {version}")));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let json_len = u64::from_le_bytes(len) as usize;
    if json_len > 1 << 20 {
        return Err(CoreError::Format(format!("unreasonable header length {json_len}")));
    }
    let mut json = vec![0u8; json_len];
    r.read_exact(&mut json)?;
    let header: Header =
        serde_json::from_slice(&json).map_err(|e| CoreError::Format(format!("header: {e}")))?;
    let grid = grid_from_header(&header)?;

    let per_value = match header.kind {
        ValueKind::Real => 8,
        ValueKind::Complex => 16,
    };
    let expected = (grid.len() * per_value) as u64;
    if header.payload_bytes != expected {
        return Err(CoreError::Format(format!(
            "payload_bytes {} does not match grid ({} expected)",
            header.payload_bytes, expected
        )));
    }

    let mut payload = vec![0u8; expected as usize];
    r.read_exact(&mut payload)?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(CoreError::Format("trailing bytes after payload".into()));
    }

    let doubles: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();

    match header.kind {
        ValueKind::Real => Ok(Field::Real(ScalarField::new(grid, doubles)?)),
        ValueKind::Complex => {
            let values: Vec<Complex64> = doubles
                .chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect();
            Ok(Field::Complex(ComplexField::new(grid, values)?))
        }
    }
}

pub fn read_scalar(path: &Path) -> Result<ScalarField> {
    match read(path)? {
        Field::Real(f) => Ok(f),
        Field::Complex(_) => Err(CoreError::Format("expected a real field".into())),
    }
}

pub fn read_complex(path: &Path) -> Result<ComplexField> {
    match read(path)? {
        Field::Complex(f) => Ok(f),
        Field::Real(_) => Err(CoreError::Format("expected a complex field".into())),
    }
}
