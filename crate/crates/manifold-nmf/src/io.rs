//! Matrix ingestion and serialization.
//!
//! Two formats are supported:
//!
//! * CSV: comma-separated, no header, one row per feature dimension, values in
//!   decimal or scientific notation.
//! * MatrixMarket: the dense `array real general` variant and the sparse
//!   `coordinate real general` variant. Sparse files are densified on load;
//!   absent entries are 0. Duplicate coordinate entries are summed.
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! save/load cycle reproduces every `f64` entry bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::NonNegMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFormat {
    Csv,
    MatrixMarket,
}

/// Reads a matrix from disk. Rows are feature dimensions, columns are samples.
pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<NonNegMatrix> {
    let text = fs::read_to_string(path)?;
    let shown = path.display().to_string();
    match format {
        MatrixFormat::Csv => parse_csv(&text, &shown),
        MatrixFormat::MatrixMarket => parse_matrix_market(&text, &shown),
    }
}

/// Writes a matrix to disk in the given format.
pub fn save_matrix(m: &NonNegMatrix, path: &Path, format: MatrixFormat) -> Result<()> {
    let text = match format {
        MatrixFormat::Csv => render_csv(m),
        MatrixFormat::MatrixMarket => render_matrix_market(m),
    };
    fs::write(path, text)?;
    Ok(())
}

pub(crate) fn parse_csv(text: &str, path: &str) -> Result<NonNegMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                path: path.to_string(),
                line: line_no,
                msg: format!("cannot parse `{}` as a real number", field.trim()),
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    path: path.to_string(),
                    line: line_no,
                    msg: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    NonNegMatrix::from_rows(&rows)
}

fn render_csv(m: &NonNegMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", m.get(i, j));
        }
        out.push('\n');
    }
    out
}

pub(crate) fn parse_matrix_market(text: &str, path: &str) -> Result<NonNegMatrix> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_string(),
        line,
        msg,
    };

    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| err(1, "empty file".to_string()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() < 5 || tokens[0] != "%%MatrixMarket" || tokens[1] != "matrix" {
        return Err(err(1, "expected `%%MatrixMarket matrix ...` header".into()));
    }
    let layout = tokens[2];
    if tokens[3] != "real" || tokens[4] != "general" {
        return Err(err(
            1,
            format!("unsupported qualifier `{} {}`; only `real general` is supported",
                tokens[3], tokens[4]),
        ));
    }

    // Skip comments and blank lines up to the size line.
    let mut size_line = None;
    for (idx, line) in lines.by_ref() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        size_line = Some((idx + 1, t.to_string()));
        break;
    }
    let (size_no, size) = size_line.ok_or_else(|| err(1, "missing size line".into()))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| err(size_no, format!("cannot parse size line `{size}`")))?;

    let mut values: Vec<(usize, f64)> = Vec::new();
    let mut entries: Vec<(usize, usize, f64, usize)> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        match layout {
            "array" => {
                if fields.len() != 1 {
                    return Err(err(line_no, "expected one value per line".into()));
                }
                let v: f64 = fields[0]
                    .parse()
                    .map_err(|_| err(line_no, format!("cannot parse `{}`", fields[0])))?;
                values.push((line_no, v));
            }
            "coordinate" => {
                if fields.len() != 3 {
                    return Err(err(line_no, "expected `i j value`".into()));
                }
                let i: usize = fields[0]
                    .parse()
                    .map_err(|_| err(line_no, format!("cannot parse index `{}`", fields[0])))?;
                let j: usize = fields[1]
                    .parse()
                    .map_err(|_| err(line_no, format!("cannot parse index `{}`", fields[1])))?;
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|_| err(line_no, format!("cannot parse `{}`", fields[2])))?;
                entries.push((i, j, v, line_no));
            }
            other => {
                return Err(err(1, format!("unsupported layout `{other}`")));
            }
        }
    }

    match layout {
        "array" => {
            if dims.len() != 2 {
                return Err(err(size_no, "array size line must be `rows cols`".into()));
            }
            let (rows, cols) = (dims[0], dims[1]);
            if rows == 0 || cols == 0 {
                return Err(Error::EmptyMatrix);
            }
            if values.len() != rows * cols {
                return Err(err(
                    size_no,
                    format!("expected {} values, found {}", rows * cols, values.len()),
                ));
            }
            // MatrixMarket array data runs down columns.
            let mut data = ndarray::Array2::<f64>::zeros((rows, cols));
            for (pos, &(_, v)) in values.iter().enumerate() {
                let j = pos / rows;
                let i = pos % rows;
                data[[i, j]] = v;
            }
            NonNegMatrix::new(data)
        }
        "coordinate" => {
            if dims.len() != 3 {
                return Err(err(size_no, "coordinate size line must be `rows cols nnz`".into()));
            }
            let (rows, cols, nnz) = (dims[0], dims[1], dims[2]);
            if rows == 0 || cols == 0 {
                return Err(Error::EmptyMatrix);
            }
            if entries.len() != nnz {
                return Err(err(
                    size_no,
                    format!("expected {} entries, found {}", nnz, entries.len()),
                ));
            }
            let mut data = ndarray::Array2::<f64>::zeros((rows, cols));
            for &(i, j, v, line_no) in &entries {
                if i < 1 || i > rows || j < 1 || j > cols {
                    return Err(err(line_no, format!("index ({i}, {j}) out of bounds")));
                }
                data[[i - 1, j - 1]] += v;
            }
            NonNegMatrix::new(data)
        }
        _ => unreachable!(),
    }
}

fn render_matrix_market(m: &NonNegMatrix) -> String {
    let mut out = String::from("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(out, "{} {}", m.rows(), m.cols());
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            let _ = writeln!(out, "{}", m.get(i, j));
        }
    }
    out
}
