//! File formats.
//!
//! Matrices are CSV with a header row `index,c0,c1,...` and the row index in
//! the first column; values use 17 significant digits so a write/read round
//! trip is lossless. Every file is written to a temporary sibling and renamed
//! into place.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Writes `bytes` to `path` via a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let tmp = temp_sibling(path);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn matrix_to_csv(m: &Matrix) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["index".to_string()];
    header.extend((0..m.ncols()).map(|j| format!("c{j}")));
    w.write_record(&header).map_err(csv_io)?;
    for i in 0..m.nrows() {
        let mut record = vec![i.to_string()];
        record.extend(m.row(i).iter().map(|x| format!("{x:.16e}")));
        w.write_record(&record).map_err(csv_io)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    write_atomic(path, &matrix_to_csv(m)?)
}

/// Parses the matrix CSV layout; `name` labels errors.
pub fn matrix_from_csv(text: &str, name: &str) -> Result<Matrix> {
    let parse_err = |line: u64, message: String| Error::Parse { file: name.to_string(), line, message };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.get(0) != Some("index") || header.len() < 2 {
        return Err(parse_err(1, "expected header `index,c0,...`".into()));
    }
    let cols = header.len() - 1;
    let mut values = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != cols + 1 {
            return Err(parse_err(line, format!("expected {} fields, found {}", cols + 1, record.len())));
        }
        for field in record.iter().skip(1) {
            let v: f64 = field.trim().parse().map_err(|_| parse_err(line, format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("`{field}` is not finite")));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(parse_err(1, "no data rows".into()));
    }
    Ok(Matrix::from_row_slice(rows, cols, &values))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path)?;
    matrix_from_csv(&text, &path.display().to_string())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Long-format overlay table `axis_name,series,value`: one row per sample of
/// every series. `series` pairs a label with one value per axis point.
pub fn long_format_csv(axis_name: &str, axis: &[f64], series: &[(String, Vec<f64>)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([axis_name, "series", "value"]).map_err(csv_io)?;
    for (label, values) in series {
        if values.len() != axis.len() {
            return Err(Error::Shape(format!("series `{label}` has {} points, axis {}", values.len(), axis.len())));
        }
        for (x, v) in axis.iter().zip(values) {
            w.write_record([format!("{x}"), label.clone(), format!("{v:.16e}")]).map_err(csv_io)?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}
