//! CSV readers and writers for datasets.
//!
//! * covariates: one row per observation, numeric columns, optional header;
//! * matrix responses: one row per observation holding `q^2` row-major values;
//! * distribution responses: first row is the quantile grid, then one row per
//!   observation.
//!
//! Floats are written with 17 significant digits, so a saved dataset reloads
//! bit-exactly.

use std::fs;
use std::path::Path;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metric::{MetricObject, QuantileFunction, QuantileGrid, ResponseKind, SymMatrix};

/// 17 significant digits in scientific notation; parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

/// Numeric rows of a CSV file; `line` is 1-based.
#[derive(Debug)]
struct NumericTable {
    rows: Vec<(usize, Vec<f64>)>,
}

fn read_numeric(path: &Path, allow_header: bool) -> Result<NumericTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_numeric(&text, allow_header)
}

fn parse_numeric(text: &str, allow_header: bool) -> Result<NumericTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(idx + 1, |p| p.line() as usize),
            column: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, usize> = record
            .iter()
            .enumerate()
            .map(|(c, f)| f.parse::<f64>().map_err(|_| c))
            .collect();
        match parsed {
            Ok(values) => rows.push((line, values)),
            Err(_) if allow_header && rows.is_empty() && idx == 0 => continue,
            Err(c) => {
                return Err(Error::Parse {
                    line,
                    column: c + 1,
                    message: format!("`{}` is not a number", &record[c]),
                })
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Shape("no numeric rows".into()));
    }
    Ok(NumericTable { rows })
}

pub fn load_covariates(path: &Path) -> Result<Vec<Vec<f64>>> {
    let table = read_numeric(path, true)?;
    let p = table.rows[0].1.len();
    for (line, row) in &table.rows {
        if row.len() != p {
            return Err(Error::Shape(format!(
                "line {line}: expected {p} covariates, found {}",
                row.len()
            )));
        }
    }
    Ok(table.rows.into_iter().map(|(_, r)| r).collect())
}

fn perfect_square(len: usize) -> Option<usize> {
    let q = (len as f64).sqrt().round() as usize;
    (q * q == len && q > 0).then_some(q)
}

pub fn load_responses(path: &Path, kind: ResponseKind) -> Result<Vec<MetricObject>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_responses(&text, kind)
}

pub fn parse_responses(text: &str, kind: ResponseKind) -> Result<Vec<MetricObject>> {
    match kind {
        ResponseKind::Matrix => {
            let table = parse_numeric(text, true)?;
            let width = table.rows[0].1.len();
            let q = perfect_square(width)
                .ok_or_else(|| Error::Shape(format!("row length {width} is not a perfect square")))?;
            table
                .rows
                .into_iter()
                .map(|(line, row)| {
                    if row.len() != width {
                        return Err(Error::Shape(format!(
                            "line {line}: expected {width} values, found {}",
                            row.len()
                        )));
                    }
                    SymMatrix::new(q, row)
                        .map(MetricObject::Matrix)
                        .map_err(|e| Error::Invariant(format!("line {line}: {e}")))
                })
                .collect()
        }
        ResponseKind::Distribution => {
            let table = parse_numeric(text, false)?;
            let mut rows = table.rows.into_iter();
            let (grid_line, levels) = rows.next().expect("non-empty");
            let grid =
                QuantileGrid::new(levels).map_err(|e| Error::Invariant(format!("line {grid_line} (grid): {e}")))?;
            let out: Vec<MetricObject> = rows
                .map(|(line, row)| {
                    if row.len() != grid.len() {
                        return Err(Error::Shape(format!(
                            "line {line}: expected {} quantiles, found {}",
                            grid.len(),
                            row.len()
                        )));
                    }
                    QuantileFunction::new(grid.clone(), row)
                        .map(MetricObject::Quantile)
                        .map_err(|e| Error::Invariant(format!("line {line}: {e}")))
                })
                .collect::<Result<_>>()?;
            if out.is_empty() {
                return Err(Error::Shape("distribution file has a grid but no observations".into()));
            }
            Ok(out)
        }
    }
}

pub fn load_dataset(covariate_path: &Path, response_path: &Path, kind: ResponseKind) -> Result<Dataset> {
    let x = load_covariates(covariate_path)?;
    let y = load_responses(response_path, kind)?;
    Dataset::new(x, y)
}

fn join_row(values: &[f64]) -> String {
    values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
}

pub fn covariates_csv(rows: impl Iterator<Item = impl AsRef<[f64]>>) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&join_row(r.as_ref()));
        out.push('\n');
    }
    out
}

pub fn responses_csv(responses: &[MetricObject]) -> String {
    let mut out = String::new();
    if let Some(MetricObject::Quantile(f)) = responses.first() {
        out.push_str(&join_row(f.grid().levels()));
        out.push('\n');
    }
    for y in responses {
        out.push_str(&join_row(y.values()));
        out.push('\n');
    }
    out
}

pub fn save_dataset(data: &Dataset, covariate_path: &Path, response_path: &Path) -> Result<()> {
    fs::write(covariate_path, covariates_csv(data.covariate_rows()))?;
    fs::write(response_path, responses_csv(data.responses()))?;
    Ok(())
}
