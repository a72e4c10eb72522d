//! LIBSVM and CSV readers for external datasets.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::Matrix;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRow {
    /// 1-based ascending feature indices with their values.
    pub features: Vec<(usize, f64)>,
    /// `+1` or `-1`.
    pub label: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDataset {
    pub rows: Vec<LabeledRow>,
    pub dim: usize,
}

/// Keep only rows whose raw label is one of two values; the first maps to
/// `+1`, the second to `-1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelFilter {
    pub positive: f64,
    pub negative: f64,
}

fn parse_err(line: usize, msg: impl Into<String>) -> IngestError {
    IngestError::Parse { line, msg: msg.into() }
}

pub fn parse_libsvm<R: BufRead>(input: R, filter: Option<LabelFilter>) -> Result<LabeledDataset, IngestError> {
    let mut data = LabeledDataset::default();
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let raw_label = parts.next().expect("line is not empty");
        let raw: f64 = raw_label
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad label {raw_label:?}")))?;
        let label = match filter {
            Some(f) if raw == f.positive => 1.0,
            Some(f) if raw == f.negative => -1.0,
            Some(_) => continue,
            None if raw > 0.0 => 1.0,
            None => -1.0,
        };
        let mut features = Vec::new();
        let mut last = 0usize;
        for tok in parts {
            let (idx, val) =
                tok.split_once(':').ok_or_else(|| parse_err(lineno, format!("expected idx:val, got {tok:?}")))?;
            let idx: usize = idx.parse().map_err(|_| parse_err(lineno, format!("bad index {idx:?}")))?;
            let val: f64 = val.parse().map_err(|_| parse_err(lineno, format!("bad value {val:?}")))?;
            if idx == 0 {
                return Err(parse_err(lineno, "indices start at 1"));
            }
            if idx <= last {
                return Err(parse_err(lineno, format!("index {idx} after {last} is not ascending")));
            }
            if !val.is_finite() {
                return Err(parse_err(lineno, format!("non-finite value at index {idx}")));
            }
            last = idx;
            features.push((idx, val));
        }
        data.dim = data.dim.max(last);
        data.rows.push(LabeledRow { features, label });
    }
    Ok(data)
}

pub fn read_libsvm(path: &Path, filter: Option<LabelFilter>) -> Result<LabeledDataset, IngestError> {
    parse_libsvm(BufReader::new(File::open(path)?), filter)
}

pub fn write_libsvm<W: Write>(data: &LabeledDataset, mut out: W) -> std::io::Result<()> {
    for row in &data.rows {
        write!(out, "{}", if row.label > 0.0 { "+1" } else { "-1" })?;
        for (i, v) in &row.features {
            write!(out, " {i}:{v:?}")?;
        }
        writeln!(out)?;
    }
    out.flush()
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Dense `N × dim` features multiplied by `scale`, and the labels.
    pub fn to_dense(&self, scale: f64) -> (Matrix, Vec<f64>) {
        let mut m = Matrix::zeros(self.rows.len(), self.dim);
        for (r, row) in self.rows.iter().enumerate() {
            for &(i, v) in &row.features {
                m.set(r, i - 1, v * scale);
            }
        }
        (m, self.rows.iter().map(|r| r.label).collect())
    }

    /// Uniform subset of `count` rows without replacement, in draw order.
    pub fn subsample(&self, count: usize, seed: u64) -> Result<LabeledDataset, IngestError> {
        if count > self.rows.len() {
            return Err(IngestError::Invalid(format!(
                "cannot draw {count} rows from {}",
                self.rows.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks = rand::seq::index::sample(&mut rng, self.rows.len(), count);
        Ok(LabeledDataset { rows: picks.iter().map(|i| self.rows[i].clone()).collect(), dim: self.dim })
    }
}

pub fn parse_returns_csv<R: BufRead>(input: R, skip_header: bool) -> Result<Matrix, IngestError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if (skip_header && i == 0) || line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                let f = f.trim();
                match f.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(parse_err(lineno, format!("bad value {f:?}"))),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    lineno,
                    format!("row {} has {} columns, expected {}", rows.len(), row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(IngestError::Invalid("returns table is empty".into()));
    }
    Matrix::from_rows(&rows).map_err(|e| IngestError::Invalid(e.to_string()))
}

pub fn read_returns_csv(path: &Path, skip_header: bool) -> Result<Matrix, IngestError> {
    parse_returns_csv(BufReader::new(File::open(path)?), skip_header)
}

pub fn write_returns_csv<W: Write>(table: &Matrix, mut out: W) -> std::io::Result<()> {
    for r in 0..table.rows() {
        let line: Vec<String> = table.row(r).iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()
}
