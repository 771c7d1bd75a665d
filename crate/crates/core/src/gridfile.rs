//! Raster file conventions shared by heightmaps, patch dumps and cost maps:
//! a `meta.json` sidecar next to little-endian `f32` planes stored row-major,
//! row 0 (north) first.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub const META_FILE: &str = "meta.json";

pub fn write_meta<T: Serialize>(dir: &Path, meta: &T) -> Result<()> {
    fs::create_dir_all(dir)?;
    let file = File::create(dir.join(META_FILE))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, meta)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_meta<T: DeserializeOwned>(dir: &Path) -> Result<T> {
    let path = dir.join(META_FILE);
    let file = File::open(&path)?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::format(&path, e.to_string()))
}

pub fn write_f32_plane(path: &Path, values: impl IntoIterator<Item = f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in values {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads exactly `count` little-endian `f32` values.
pub fn read_f32_plane(path: &Path, count: usize) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() != count * 4 {
        return Err(Error::format(
            path,
            format!("expected {} bytes, found {}", count * 4, bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect())
}

/// Reads a headerless CSV matrix of `rows` lines with `cols` values each.
pub fn read_csv_matrix(path: &Path, rows: usize, cols: usize) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut values = Vec::with_capacity(rows * cols);
    let mut seen_rows = 0;
    for record in reader.records() {
        let record = record?;
        if record.len() != cols {
            return Err(Error::format(
                path,
                format!(
                    "row {seen_rows} has {} values, expected {cols}",
                    record.len()
                ),
            ));
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::format(path, format!("bad number {field:?}")))?;
            values.push(v);
        }
        seen_rows += 1;
    }
    if seen_rows != rows {
        return Err(Error::format(
            path,
            format!("found {seen_rows} rows, expected {rows}"),
        ));
    }
    Ok(values)
}
