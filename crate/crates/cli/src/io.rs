//! Panel and matrix files.
//!
//! Panels travel either as a long table `t,i,j,value` with 1-based indices,
//! where absent rows are missing entries, or as a JSON manifest naming a
//! dense little-endian `f64` blob laid out t-major then row-major, in which
//! NaN marks a missing entry. Matrices are headerless CSV.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use mqf_core::MatrixPanel;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

const LONG_HEADER: [&str; 4] = ["t", "i", "j", "value"];

/// Sidecar descriptor of a dense binary panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub periods: usize,
    pub p1: usize,
    pub p2: usize,
    /// Path of the blob, relative to the manifest.
    pub data: String,
}

/// Full-precision text form of a float; parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Reads a panel, choosing the format by extension (`.json` is a manifest).
/// `dims` fixes `(T, p1, p2)` for long tables; otherwise the largest indices
/// present are used.
pub fn read_panel(path: &Path, dims: Option<[usize; 3]>) -> Result<MatrixPanel> {
    if path.extension().is_some_and(|e| e == "json") {
        read_manifest(path)
    } else {
        read_long_csv(path, dims)
    }
}

fn csv_error(path: &Path, err: csv::Error) -> CliError {
    let line = err.position().map_or(0, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(source) => CliError::io(path, source),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => CliError::parse_at(
            path,
            line,
            format!("expected {expected_len} fields, found {len}"),
        ),
        csv::ErrorKind::Utf8 { err, .. } => CliError::parse_at(path, line, err),
        other => CliError::parse_at(path, line, format!("{other:?}")),
    }
}

fn parse_index(path: &Path, line: u64, name: &str, field: &str) -> Result<usize> {
    match field.parse::<usize>() {
        Ok(0) => Err(CliError::parse_at(
            path,
            line,
            format!("{name} is 1-based, found 0"),
        )),
        Ok(v) => Ok(v - 1),
        Err(_) => Err(CliError::parse_at(
            path,
            line,
            format!("{name} `{field}` is not a positive integer"),
        )),
    }
}

pub fn read_long_csv(path: &Path, dims: Option<[usize; 3]>) -> Result<MatrixPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(LONG_HEADER) {
        return Err(CliError::parse_at(
            path,
            1,
            format!(
                "expected header `t,i,j,value`, found `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    // (t, i, j, value, line); NaN values are kept as missing.
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let t = parse_index(path, line, "t", &record[0])?;
        let i = parse_index(path, line, "i", &record[1])?;
        let j = parse_index(path, line, "j", &record[2])?;
        let value: f64 = record[3].parse().map_err(|_| {
            CliError::parse_at(
                path,
                line,
                format!("value `{}` is not a number", &record[3]),
            )
        })?;
        if value.is_infinite() {
            return Err(CliError::parse_at(path, line, "value is infinite"));
        }
        rows.push((t, i, j, value, line));
    }
    let [periods, p1, p2] = match dims {
        Some(d) => d,
        None => {
            let max = |f: fn(&(usize, usize, usize, f64, u64)) -> usize| {
                rows.iter().map(f).max().map_or(0, |m| m + 1)
            };
            [max(|r| r.0), max(|r| r.1), max(|r| r.2)]
        }
    };
    if rows.is_empty() {
        return Err(CliError::Parse(format!("{}: no data rows", path.display())));
    }
    let n = periods * p1 * p2;
    let mut values = vec![0.0; n];
    let mut mask = vec![false; n];
    let mut seen = vec![false; n];
    for &(t, i, j, value, line) in &rows {
        if t >= periods || i >= p1 || j >= p2 {
            return Err(CliError::parse_at(
                path,
                line,
                format!(
                    "entry ({}, {}, {}) outside T={periods}, p1={p1}, p2={p2}",
                    t + 1,
                    i + 1,
                    j + 1
                ),
            ));
        }
        let k = (t * p1 + i) * p2 + j;
        if seen[k] {
            return Err(CliError::parse_at(
                path,
                line,
                format!("duplicate entry ({}, {}, {})", t + 1, i + 1, j + 1),
            ));
        }
        seen[k] = true;
        if !value.is_nan() {
            values[k] = value;
            mask[k] = true;
        }
    }
    Ok(MatrixPanel::with_mask(periods, p1, p2, values, mask)?)
}

pub fn read_manifest(path: &Path) -> Result<MatrixPanel> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| CliError::parse_at(path, e.line() as u64, e))?;
    let blob = path.parent().unwrap_or(Path::new(".")).join(&manifest.data);
    let bytes = fs::read(&blob).map_err(|e| CliError::io(&blob, e))?;
    let n = manifest.periods * manifest.p1 * manifest.p2;
    if bytes.len() != 8 * n {
        return Err(CliError::Parse(format!(
            "{}: expected {} bytes for T={}, p1={}, p2={}, found {}",
            blob.display(),
            8 * n,
            manifest.periods,
            manifest.p1,
            manifest.p2,
            bytes.len()
        )));
    }
    let raw: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let mask: Vec<bool> = raw.iter().map(|v| !v.is_nan()).collect();
    let values = raw
        .iter()
        .map(|&v| if v.is_nan() { 0.0 } else { v })
        .collect();
    Ok(MatrixPanel::with_mask(
        manifest.periods,
        manifest.p1,
        manifest.p2,
        values,
        mask,
    )?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes the observed entries as a long table.
pub fn write_long_csv(path: &Path, panel: &MatrixPanel) -> Result<()> {
    let mut w = create(path)?;
    let (periods, p1, p2) = panel.dims();
    let io = |e| CliError::io(path, e);
    writeln!(w, "t,i,j,value").map_err(io)?;
    for t in 0..periods {
        for i in 0..p1 {
            for j in 0..p2 {
                if panel.is_observed(t, i, j) {
                    writeln!(
                        w,
                        "{},{},{},{}",
                        t + 1,
                        i + 1,
                        j + 1,
                        fmt_f64(panel.value(t, i, j))
                    )
                    .map_err(io)?;
                }
            }
        }
    }
    finish(path, w)
}

/// Writes `<stem>.bin` and its manifest `<stem>.json` into `dir`.
pub fn write_binary(dir: &Path, stem: &str, panel: &MatrixPanel) -> Result<()> {
    let blob = dir.join(format!("{stem}.bin"));
    let mut w = create(&blob)?;
    for (&v, &m) in panel.values().iter().zip(panel.mask()) {
        let v = if m { v } else { f64::NAN };
        w.write_all(&v.to_le_bytes())
            .map_err(|e| CliError::io(&blob, e))?;
    }
    finish(&blob, w)?;
    let (periods, p1, p2) = panel.dims();
    let manifest = Manifest {
        periods,
        p1,
        p2,
        data: format!("{stem}.bin"),
    };
    write_json(&dir.join(format!("{stem}.json")), &manifest)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e.into()))?;
    writeln!(w).map_err(|e| CliError::io(path, e))?;
    finish(path, w)
}

fn write_rows(w: &mut impl Write, m: &DMatrix<f64>) -> std::io::Result<()> {
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = create(path)?;
    write_rows(&mut w, m).map_err(|e| CliError::io(path, e))?;
    finish(path, w)
}

/// Writes the blocks one under the other.
pub fn write_blocks(path: &Path, blocks: &[DMatrix<f64>]) -> Result<()> {
    let mut w = create(path)?;
    for b in blocks {
        write_rows(&mut w, b).map_err(|e| CliError::io(path, e))?;
    }
    finish(path, w)
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut data = Vec::new();
    let mut ncols = 0;
    let mut nrows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        ncols = record.len();
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::parse_at(path, line, format!("`{field}` is not a number"))
            })?;
            if !v.is_finite() {
                return Err(CliError::parse_at(
                    path,
                    line,
                    "matrix entries must be finite",
                ));
            }
            data.push(v);
        }
        nrows += 1;
    }
    if nrows == 0 {
        return Err(CliError::Parse(format!("{}: empty matrix", path.display())));
    }
    Ok(DMatrix::from_row_slice(nrows, ncols, &data))
}

/// Splits a stacked file into blocks of `rows` rows.
pub fn read_blocks(path: &Path, rows: usize) -> Result<Vec<DMatrix<f64>>> {
    let m = read_matrix(path)?;
    if rows == 0 || m.nrows() % rows != 0 {
        return Err(CliError::Parse(format!(
            "{}: {} rows do not split into blocks of {rows}",
            path.display(),
            m.nrows()
        )));
    }
    Ok((0..m.nrows() / rows)
        .map(|b| m.rows(b * rows, rows).into_owned())
        .collect())
}
