//! Matrix Market reader and writer for dense real matrices.
//!
//! Reads `coordinate` and `array` storage with `real` or `integer` fields and
//! `general` or `symmetric` symmetry. Writes `array general` or
//! `coordinate general` with round-trip precision.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Storage {
    Array,
    Coordinate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

fn parse_error(line: usize, msg: impl Into<String>) -> Error {
    Error::MatrixMarket { line, msg: msg.into() }
}

fn parse_header(line_no: usize, line: &str) -> Result<(Storage, Symmetry)> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_error(line_no, format!("expected a '%%MatrixMarket matrix' banner, got '{line}'")));
    }
    let storage = match tokens[2].as_str() {
        "array" => Storage::Array,
        "coordinate" => Storage::Coordinate,
        other => return Err(parse_error(line_no, format!("unsupported storage '{other}'"))),
    };
    if !matches!(tokens[3].as_str(), "real" | "integer" | "double") {
        return Err(parse_error(line_no, format!("unsupported field '{}'", tokens[3])));
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(parse_error(line_no, format!("unsupported symmetry '{other}'"))),
    };
    Ok((storage, symmetry))
}

fn parse_usize(line_no: usize, token: &str, what: &str) -> Result<usize> {
    token.parse().map_err(|_| parse_error(line_no, format!("invalid {what} '{token}'")))
}

fn parse_value(line_no: usize, token: &str) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| parse_error(line_no, format!("invalid value '{token}'")))?;
    if !v.is_finite() {
        return Err(parse_error(line_no, format!("non-finite value '{token}'")));
    }
    Ok(v)
}

/// Parses a Matrix Market stream into a dense matrix.
pub fn read_matrix_market(reader: impl BufRead) -> Result<Matrix> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (header_no, header) = match lines.next() {
        Some((n, l)) => (n, l?),
        None => return Err(parse_error(1, "empty input")),
    };
    let (storage, symmetry) = parse_header(header_no, header.trim())?;

    let mut data = Vec::new();
    for (no, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        data.push((no, trimmed.to_string()));
    }
    let mut entries = data.into_iter();
    let (size_no, size_line) = entries.next().ok_or_else(|| parse_error(header_no, "missing size line"))?;
    let size: Vec<&str> = size_line.split_whitespace().collect();
    let expected_size_tokens = if storage == Storage::Array { 2 } else { 3 };
    if size.len() != expected_size_tokens {
        return Err(parse_error(size_no, format!("expected {expected_size_tokens} integers on the size line")));
    }
    let rows = parse_usize(size_no, size[0], "row count")?;
    let cols = parse_usize(size_no, size[1], "column count")?;
    if symmetry == Symmetry::Symmetric && rows != cols {
        return Err(parse_error(size_no, format!("symmetric matrix must be square, got {rows}x{cols}")));
    }
    let mut m = Array2::zeros((rows, cols));

    match storage {
        Storage::Array => {
            let positions: Vec<(usize, usize)> = match symmetry {
                Symmetry::General => (0..cols).flat_map(|j| (0..rows).map(move |i| (i, j))).collect(),
                Symmetry::Symmetric => (0..cols).flat_map(|j| (j..rows).map(move |i| (i, j))).collect(),
            };
            let mut values = Vec::with_capacity(positions.len());
            let mut last_no = size_no;
            for (no, line) in entries {
                last_no = no;
                for token in line.split_whitespace() {
                    values.push((no, parse_value(no, token)?));
                }
            }
            if values.len() != positions.len() {
                return Err(parse_error(
                    last_no,
                    format!("expected {} values, found {}", positions.len(), values.len()),
                ));
            }
            for ((i, j), (_, v)) in positions.into_iter().zip(values) {
                m[[i, j]] = v;
                if symmetry == Symmetry::Symmetric {
                    m[[j, i]] = v;
                }
            }
        }
        Storage::Coordinate => {
            let nnz = parse_usize(size_no, size[2], "entry count")?;
            let mut count = 0;
            let mut last_no = size_no;
            for (no, line) in entries {
                last_no = no;
                let t: Vec<&str> = line.split_whitespace().collect();
                if t.len() != 3 {
                    return Err(parse_error(no, "expected 'row column value'"));
                }
                let i = parse_usize(no, t[0], "row index")?;
                let j = parse_usize(no, t[1], "column index")?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(parse_error(no, format!("index ({i}, {j}) outside {rows}x{cols}")));
                }
                if symmetry == Symmetry::Symmetric && j > i {
                    return Err(parse_error(no, format!("symmetric storage expects the lower triangle, got ({i}, {j})")));
                }
                let v = parse_value(no, t[2])?;
                m[[i - 1, j - 1]] += v;
                if symmetry == Symmetry::Symmetric && i != j {
                    m[[j - 1, i - 1]] += v;
                }
                count += 1;
            }
            if count != nnz {
                return Err(parse_error(last_no, format!("expected {nnz} entries, found {count}")));
            }
        }
    }
    Ok(m)
}

pub fn read_matrix_market_file(path: &Path) -> Result<Matrix> {
    read_matrix_market(BufReader::new(File::open(path)?))
}

/// Writes `m` in general storage; `{:e}` formatting round-trips exactly.
pub fn write_matrix_market(mut writer: impl Write, m: &Matrix, storage: Storage) -> Result<()> {
    let (rows, cols) = m.dim();
    match storage {
        Storage::Array => {
            writeln!(writer, "%%MatrixMarket matrix array real general")?;
            writeln!(writer, "{rows} {cols}")?;
            for j in 0..cols {
                for i in 0..rows {
                    writeln!(writer, "{:e}", m[[i, j]])?;
                }
            }
        }
        Storage::Coordinate => {
            let nonzeros: Vec<_> = m.indexed_iter().filter(|(_, v)| **v != 0.0).collect();
            writeln!(writer, "%%MatrixMarket matrix coordinate real general")?;
            writeln!(writer, "{rows} {cols} {}", nonzeros.len())?;
            for ((i, j), v) in nonzeros {
                writeln!(writer, "{} {} {:e}", i + 1, j + 1, v)?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn write_matrix_market_file(path: &Path, m: &Matrix, storage: Storage) -> Result<()> {
    write_matrix_market(BufWriter::new(File::create(path)?), m, storage)
}
