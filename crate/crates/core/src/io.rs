//! Token grid files.
//!
//! A grid is stored as a JSON header
//! `{"M":…,"D":…,"W":…,"H":…,"F":…,"dtype":"f32"|"f64","layout":"row-major"}`
//! next to a raw little-endian payload of `M x D` values. The payload path is
//! the optional `"payload"` header key (relative to the header), else the
//! header path with a `.bin` extension.
//!
//! Small hand-made fixtures can be CSV with a `x,y,frame,f0,…,f{D-1}` header,
//! one token per line, `x`/`y`/`frame` being 0-based column, row and frame.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TokenGrid;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridHeader {
    #[serde(rename = "M")]
    pub tokens: usize,
    #[serde(rename = "D")]
    pub dim: usize,
    #[serde(rename = "W")]
    pub width: usize,
    #[serde(rename = "H")]
    pub height: usize,
    #[serde(rename = "F")]
    pub frames: usize,
    pub dtype: String,
    pub layout: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

impl GridHeader {
    fn value_size(&self) -> Option<usize> {
        match self.dtype.as_str() {
            "f32" => Some(4),
            "f64" => Some(8),
            _ => None,
        }
    }
}

fn payload_path(header_path: &Path, header: &GridHeader) -> PathBuf {
    match &header.payload {
        Some(p) => header_path.parent().unwrap_or(Path::new(".")).join(p),
        None => header_path.with_extension("bin"),
    }
}

/// Reads a grid, dispatching on extension: `.csv` for CSV fixtures, anything
/// else as a JSON header with a binary payload.
pub fn read_grid<T: Scalar>(path: impl AsRef<Path>) -> Result<TokenGrid<T>> {
    let path = path.as_ref();
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        read_grid_csv(path)
    } else {
        read_grid_binary(path)
    }
}

pub fn read_grid_binary<T: Scalar>(header_path: impl AsRef<Path>) -> Result<TokenGrid<T>> {
    let header_path = header_path.as_ref();
    let header: GridHeader = serde_json::from_str(&fs::read_to_string(header_path)?)
        .map_err(|e| Error::format(header_path, e.to_string()))?;
    if header.layout != "row-major" {
        return Err(Error::format(
            header_path,
            format!("unsupported layout `{}`", header.layout),
        ));
    }
    let size = header.value_size().ok_or_else(|| {
        Error::format(header_path, format!("unsupported dtype `{}`", header.dtype))
    })?;
    if header.tokens != header.width * header.height * header.frames {
        return Err(Error::format(
            header_path,
            format!(
                "M = {} but W x H x F = {}",
                header.tokens,
                header.width * header.height * header.frames
            ),
        ));
    }
    let data_path = payload_path(header_path, &header);
    let bytes = fs::read(&data_path)?;
    let expected = header.tokens * header.dim * size;
    if bytes.len() != expected {
        return Err(Error::format(
            &data_path,
            format!(
                "payload has {} bytes, header implies {expected}",
                bytes.len()
            ),
        ));
    }
    let values: Vec<T> = if size == 4 {
        bytes
            .chunks_exact(4)
            .map(|b| T::of(f32::from_le_bytes(b.try_into().expect("4-byte chunk")) as f64))
            .collect()
    } else {
        bytes
            .chunks_exact(8)
            .map(|b| T::of(f64::from_le_bytes(b.try_into().expect("8-byte chunk"))))
            .collect()
    };
    TokenGrid::new(
        values,
        header.dim,
        header.width,
        header.height,
        header.frames,
    )
    .map_err(|e| Error::format(&data_path, e.to_string()))
}

/// Writes `<stem>.json` and `<stem>.bin`, storing values as the grid's own
/// scalar type. Returns the header path.
pub fn write_grid<T: Scalar>(
    grid: &TokenGrid<T>,
    header_path: impl AsRef<Path>,
) -> Result<PathBuf> {
    let header_path = header_path.as_ref().with_extension("json");
    let data_path = header_path.with_extension("bin");
    let header = GridHeader {
        tokens: grid.len(),
        dim: grid.dim(),
        width: grid.width(),
        height: grid.height(),
        frames: grid.frames(),
        dtype: T::dtype().to_string(),
        layout: "row-major".to_string(),
        payload: data_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned()),
    };
    let mut bytes = Vec::with_capacity(std::mem::size_of_val(grid.embeddings()));
    for v in grid.embeddings() {
        match T::dtype() {
            "f32" => bytes.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes()),
            _ => bytes.extend_from_slice(&v.to_f64_lossy().to_le_bytes()),
        }
    }
    fs::write(&data_path, bytes)?;
    fs::write(&header_path, serde_json::to_string_pretty(&header)? + "\n")?;
    Ok(header_path)
}

pub fn read_grid_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<TokenGrid<T>> {
    let path = path.as_ref();
    let bad = |msg: String| Error::format(path, msg);
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() < 4 || &headers[0] != "x" || &headers[1] != "y" || &headers[2] != "frame" {
        return Err(bad("header must be x,y,frame,f0,…".into()));
    }
    let dim = headers.len() - 3;
    let mut tokens: Vec<(usize, usize, usize, Vec<f64>)> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let index = |col: usize| -> Result<usize> {
            record[col].parse().map_err(|_| {
                bad(format!(
                    "row {}: `{}` is not a grid index",
                    line + 1,
                    &record[col]
                ))
            })
        };
        let (x, y, frame) = (index(0)?, index(1)?, index(2)?);
        let features = (3..record.len())
            .map(|c| {
                record[c].parse::<f64>().map_err(|_| {
                    bad(format!(
                        "row {}: `{}` is not a number",
                        line + 1,
                        &record[c]
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        tokens.push((x, y, frame, features));
    }
    if tokens.is_empty() {
        return Err(bad("no tokens".into()));
    }
    let width = tokens.iter().map(|t| t.0).max().unwrap_or(0) + 1;
    let height = tokens.iter().map(|t| t.1).max().unwrap_or(0) + 1;
    let frames = tokens.iter().map(|t| t.2).max().unwrap_or(0) + 1;
    let m = width * height * frames;
    if tokens.len() != m {
        return Err(bad(format!(
            "{} rows do not fill a {width} x {height} x {frames} grid",
            tokens.len()
        )));
    }
    let mut values = vec![T::zero(); m * dim];
    let mut seen = vec![false; m];
    for (x, y, frame, features) in tokens {
        let i = frame * width * height + y * width + x;
        if std::mem::replace(&mut seen[i], true) {
            return Err(bad(format!(
                "duplicate token at x={x}, y={y}, frame={frame}"
            )));
        }
        for (slot, v) in values[i * dim..(i + 1) * dim].iter_mut().zip(features) {
            *slot = T::of(v);
        }
    }
    TokenGrid::new(values, dim, width, height, frames).map_err(|e| bad(e.to_string()))
}

pub fn write_grid_csv<T: Scalar>(grid: &TokenGrid<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    let header: Vec<String> = ["x", "y", "frame"]
        .iter()
        .map(|s| s.to_string())
        .chain((0..grid.dim()).map(|d| format!("f{d}")))
        .collect();
    out.write_record(&header)?;
    for i in 0..grid.len() {
        let (frame, row, col) = grid.position(i);
        let record: Vec<String> = [col, row, frame]
            .iter()
            .map(|v| v.to_string())
            .chain(grid.row(i).iter().map(|v| v.to_string()))
            .collect();
        out.write_record(&record)?;
    }
    out.flush()?;
    Ok(())
}
