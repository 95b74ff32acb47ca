//! Plain-text matrix and vector files: delimiter-separated values,
//! header-free, row per line, dimensions inferred. Writes go through a
//! temp-file rename so readers never observe partial output.

use crate::numerics::DenseMatrix;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: cannot parse '{token}' as a number")]
    Parse {
        path: String,
        line: usize,
        token: String,
    },
    #[error("{path}:{line}: non-finite value rejected")]
    NonFinite { path: String, line: usize },
    #[error("{path}:{line}: expected {expected} columns, found {found}")]
    RaggedRow {
        path: String,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}: empty file")]
    Empty { path: String },
    #[error("{path}: expected a vector (single row or column), got {rows}x{cols}")]
    NotAVector {
        path: String,
        rows: usize,
        cols: usize,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> FileError {
    FileError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads a dense matrix, inferring dimensions. Fields split on commas,
/// semicolons, or whitespace; blank lines are skipped; NaN and infinities
/// are rejected.
pub fn read_matrix(path: &Path) -> Result<DenseMatrix, FileError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let display = path.display().to_string();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_num = lineno + 1;
        let tokens: Vec<&str> = line
            .split(|ch: char| ch == ',' || ch == ';' || ch.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        if tokens.is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(tokens.len());
        for token in tokens {
            let value: f64 = token.parse().map_err(|_| FileError::Parse {
                path: display.clone(),
                line: line_num,
                token: token.to_string(),
            })?;
            if !value.is_finite() {
                return Err(FileError::NonFinite {
                    path: display.clone(),
                    line: line_num,
                });
            }
            row.push(value);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(FileError::RaggedRow {
                    path: display.clone(),
                    line: line_num,
                    expected: first.len(),
                    found: row.len(),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(FileError::Empty { path: display });
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(DenseMatrix::new(r, c, rows.into_iter().flatten().collect()))
}

/// Reads a vector: a one-column or one-row matrix, flattened.
pub fn read_vector(path: &Path) -> Result<Vec<f64>, FileError> {
    let m = read_matrix(path)?;
    if m.cols() == 1 || m.rows() == 1 {
        Ok(m.data().to_vec())
    } else {
        Err(FileError::NotAVector {
            path: path.display().to_string(),
            rows: m.rows(),
            cols: m.cols(),
        })
    }
}

/// Writes a file atomically: to `<path>.tmp`, then rename.
pub fn atomic_write(path: &Path, contents: &str) -> Result<(), FileError> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}
