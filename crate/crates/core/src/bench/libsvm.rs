//! LIBSVM text format: `label idx:val idx:val ...` with 1-based indices.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::ColMatrix;

/// Unnormalized contents of a LIBSVM file: one column per example, one row
/// per feature, labels as written.
#[derive(Debug, Clone, PartialEq)]
pub struct RawLibsvm {
    pub matrix: ColMatrix,
    pub labels: Vec<f64>,
}

pub fn parse_libsvm<R: BufRead>(reader: R, source: &Path) -> Result<RawLibsvm> {
    let mut labels = Vec::new();
    let mut entries = Vec::new();
    let mut d = 0;
    for (ln, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.split('#').next().unwrap_or("");
        let mut tokens = line.split_whitespace();
        let Some(label) = tokens.next() else {
            continue;
        };
        let err = |token: usize, msg: String| Error::ParseError {
            line: ln + 1,
            token,
            msg,
        };
        let label: f64 = label
            .parse()
            .map_err(|_| err(1, format!("bad label {label:?}")))?;
        let col = labels.len();
        labels.push(label);
        let mut last = 0;
        for (j, tok) in tokens.enumerate() {
            let pos = j + 2;
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(pos, format!("expected idx:val, got {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| err(pos, format!("bad feature index {idx:?}")))?;
            let val: f64 = val
                .parse()
                .map_err(|_| err(pos, format!("bad feature value {val:?}")))?;
            if idx == 0 {
                return Err(err(pos, "feature indices are 1-based".into()));
            }
            if idx <= last {
                return Err(err(pos, format!("feature index {idx} not increasing")));
            }
            if !val.is_finite() {
                return Err(err(pos, format!("non-finite value {val}")));
            }
            last = idx;
            d = d.max(idx);
            entries.push((idx - 1, col, val));
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyFile(source.to_path_buf()));
    }
    let matrix = ColMatrix::from_triplets(&entries, d, labels.len())?;
    Ok(RawLibsvm { matrix, labels })
}

pub fn load_raw_libsvm(path: &Path) -> Result<RawLibsvm> {
    parse_libsvm(BufReader::new(std::fs::File::open(path)?), path)
}

/// Maps labels to `+-1` (positive values to `+1`, the rest to `-1`).
pub fn binarize_labels(labels: &[f64]) -> Vec<f64> {
    if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
        log::warn!("labels outside {{-1, +1}} thresholded at 0");
    }
    labels.iter().map(|&y| if y > 0.0 { 1.0 } else { -1.0 }).collect()
}

/// Examples as normalized columns plus `+-1` labels.
pub fn load_libsvm(path: &Path) -> Result<(ColMatrix, Vec<f64>)> {
    let raw = load_raw_libsvm(path)?;
    Ok((raw.matrix.normalize_columns().0, binarize_labels(&raw.labels)))
}

pub fn save_libsvm(path: &Path, m: &ColMatrix, labels: &[f64]) -> Result<()> {
    if labels.len() != m.cols() {
        return Err(Error::DimensionMismatch {
            expected: m.cols(),
            got: labels.len(),
        });
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (i, y) in labels.iter().enumerate() {
        write!(out, "{y}")?;
        let (rows, vals) = m.column(i);
        for (r, v) in rows.iter().zip(vals) {
            write!(out, " {}:{v}", r + 1)?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Swaps the roles of rows and columns.
pub fn transpose(m: &ColMatrix) -> Result<ColMatrix> {
    let mut entries = Vec::with_capacity(m.nnz());
    for c in 0..m.cols() {
        let (rows, vals) = m.column(c);
        entries.extend(rows.iter().zip(vals).map(|(&r, &v)| (c, r, v)));
    }
    ColMatrix::from_triplets(&entries, m.cols(), m.rows())
}
