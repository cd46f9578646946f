//! Response spaces: symmetric matrices under the Frobenius metric and
//! one-dimensional distributions (as quantile functions on a fixed grid) under
//! the L2-Wasserstein metric, together with their weighted Fréchet means.
//!
//! Both weighted means are closed form. For matrices the minimizer of
//! `sum_i c_i d^2(Y_i, u)` is the coefficient-weighted average. For quantile
//! functions it is the weighted average of the quantile vectors projected back
//! onto the monotone cone, since individual coefficients may be negative.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isotonic::isotonic_projection;

/// Coefficient sums with absolute value at or below this are rejected.
pub const DENOMINATOR_FLOOR: f64 = 1e-10;

/// Largest entrywise asymmetry accepted (and symmetrized) on construction.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Which metric space a response lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseKind {
    Matrix,
    Distribution,
}

impl fmt::Display for ResponseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResponseKind::Matrix => f.write_str("matrix"),
            ResponseKind::Distribution => f.write_str("distribution"),
        }
    }
}

impl std::str::FromStr for ResponseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "matrix" => Ok(ResponseKind::Matrix),
            "distribution" | "quantile" => Ok(ResponseKind::Distribution),
            other => Err(Error::InvalidParameter(format!("unknown response kind `{other}`"))),
        }
    }
}

/// A real symmetric `dim x dim` matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Builds a matrix from row-major entries. Entries that are asymmetric by
    /// at most [`SYMMETRY_TOLERANCE`] are replaced by `(A + A^T) / 2`.
    pub fn new(dim: usize, mut entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("matrix dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invariant(format!(
                "non-finite matrix entry at ({}, {})",
                pos / dim,
                pos % dim
            )));
        }
        for j in 0..dim {
            for k in (j + 1)..dim {
                let a = entries[j * dim + k];
                let b = entries[k * dim + j];
                if (a - b).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::Invariant(format!("matrix asymmetric at ({j}, {k}): {a} vs {b}")));
                }
                if a != b {
                    let m = 0.5 * (a + b);
                    entries[j * dim + k] = m;
                    entries[k * dim + j] = m;
                }
            }
        }
        Ok(SymMatrix { dim, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        SymMatrix::new(dim, rows.concat())
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for j in 0..dim {
            entries[j * dim + j] = 1.0;
        }
        SymMatrix { dim, entries }
    }

    pub fn ones(dim: usize) -> Self {
        SymMatrix {
            dim,
            entries: vec![1.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    /// Adds `shift` to every entry, diagonal included.
    pub fn shifted(&self, shift: f64) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|v| v + shift).collect(),
        }
    }

    /// Entrywise linear combination `a * self + b * other` (same dim assumed).
    pub fn combine(&self, a: f64, other: &SymMatrix, b: f64) -> Result<SymMatrix> {
        check_dims(self, other)?;
        Ok(SymMatrix {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }
}

fn check_dims(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            found: b.dim,
        });
    }
    Ok(())
}

#[derive(Debug)]
struct GridData {
    levels: Vec<f64>,
    weights: Vec<f64>,
}

/// Strictly increasing quantile levels in (0, 1) with their trapezoid weights.
///
/// Cloning is cheap; all quantile functions on one grid share the levels.
#[derive(Debug, Clone)]
pub struct QuantileGrid {
    inner: Arc<GridData>,
}

impl PartialEq for QuantileGrid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.inner.levels == other.inner.levels
    }
}

impl QuantileGrid {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::Shape("quantile grid needs at least two levels".into()));
        }
        if let Some(z) = levels.iter().find(|z| !(z.is_finite() && **z > 0.0 && **z < 1.0)) {
            return Err(Error::Invariant(format!("quantile level {z} outside (0, 1)")));
        }
        if let Some(j) = levels.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Invariant(format!(
                "quantile grid not strictly increasing at position {}",
                j + 1
            )));
        }
        let m = levels.len();
        let weights = (0..m)
            .map(|j| {
                let left = if j == 0 { levels[0] } else { levels[j - 1] };
                let right = if j + 1 == m { levels[m - 1] } else { levels[j + 1] };
                0.5 * (right - left)
            })
            .collect();
        Ok(QuantileGrid {
            inner: Arc::new(GridData { levels, weights }),
        })
    }

    /// The 81-point grid 0.10, 0.11, ..., 0.90.
    pub fn standard() -> Self {
        QuantileGrid::new((0..81).map(|j| (10 + j) as f64 / 100.0).collect()).expect("standard grid is valid")
    }

    pub fn levels(&self) -> &[f64] {
        &self.inner.levels
    }

    /// Trapezoid integration weights over `[levels[0], levels[last]]`.
    pub fn weights(&self) -> &[f64] {
        &self.inner.weights
    }

    pub fn len(&self) -> usize {
        self.inner.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.levels.is_empty()
    }

    /// Trapezoid approximation of the integral of `f^2` given samples of `f`.
    pub fn integrate_squared(&self, f: impl Iterator<Item = f64>) -> f64 {
        self.weights().iter().zip(f).map(|(w, v)| w * v * v).sum()
    }
}

/// A monotone quantile function sampled on a [`QuantileGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFunction {
    grid: QuantileGrid,
    values: Vec<f64>,
}

impl QuantileFunction {
    pub fn new(grid: QuantileGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invariant(format!("non-finite quantile value at position {j}")));
        }
        if let Some(j) = values.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::Invariant(format!(
                "quantile values decrease between positions {j} and {}",
                j + 1
            )));
        }
        Ok(QuantileFunction { grid, values })
    }

    pub fn grid(&self) -> &QuantileGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Adds `shift` to every quantile value.
    pub fn shifted(&self, shift: f64) -> QuantileFunction {
        QuantileFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v + shift).collect(),
        }
    }
}

fn check_grids(a: &QuantileFunction, b: &QuantileFunction) -> Result<()> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// `sqrt(trace((a - b)^T (a - b)))`.
pub fn frobenius_distance(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    Ok(frobenius_sq(a, b)?.sqrt())
}

fn frobenius_sq(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.entries.iter().zip(&b.entries).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// L2 distance between quantile functions, trapezoid rule over the grid range.
pub fn wasserstein_distance(a: &QuantileFunction, b: &QuantileFunction) -> Result<f64> {
    Ok(wasserstein_sq(a, b)?.sqrt())
}

fn wasserstein_sq(a: &QuantileFunction, b: &QuantileFunction) -> Result<f64> {
    check_grids(a, b)?;
    Ok(a.grid
        .integrate_squared(a.values.iter().zip(&b.values).map(|(x, y)| x - y)))
}

fn coefficient_sum(len: usize, coeffs: &[f64]) -> Result<f64> {
    if len != coeffs.len() {
        return Err(Error::DimensionMismatch {
            expected: len,
            found: coeffs.len(),
        });
    }
    if len == 0 {
        return Err(Error::Shape("weighted mean of an empty collection".into()));
    }
    let sum: f64 = coeffs.iter().sum();
    if !(sum.abs() > DENOMINATOR_FLOOR) {
        return Err(Error::NearSingularDenominator { sum });
    }
    Ok(sum)
}

fn accumulate<'a>(width: usize, rows: impl Iterator<Item = &'a [f64]>, coeffs: &[f64], sum: f64) -> Vec<f64> {
    let mut acc = vec![0.0; width];
    for (row, &c) in rows.zip(coeffs) {
        if c == 0.0 {
            continue;
        }
        for (a, v) in acc.iter_mut().zip(row) {
            *a += c * v;
        }
    }
    for a in acc.iter_mut() {
        *a /= sum;
    }
    acc
}

/// `sum_i c_i Y_i / sum_i c_i`; the global minimizer of the weighted sum of
/// squared Frobenius distances whenever `sum_i c_i > 0`.
pub fn weighted_mean_matrix(objects: &[SymMatrix], coeffs: &[f64]) -> Result<SymMatrix> {
    mean_matrix(objects.iter(), objects.len(), coeffs)
}

fn mean_matrix<'a>(
    objects: impl Iterator<Item = &'a SymMatrix> + Clone,
    len: usize,
    coeffs: &[f64],
) -> Result<SymMatrix> {
    let sum = coefficient_sum(len, coeffs)?;
    let first = objects.clone().next().expect("non-empty");
    for m in objects.clone() {
        check_dims(first, m)?;
    }
    let dim = first.dim;
    let entries = accumulate(dim * dim, objects.map(|m| m.entries.as_slice()), coeffs, sum);
    Ok(SymMatrix { dim, entries })
}

/// Weighted average of quantile vectors followed by a monotone projection
/// under the grid's integration weights.
pub fn weighted_mean_quantile(objects: &[QuantileFunction], coeffs: &[f64]) -> Result<QuantileFunction> {
    mean_quantile(objects.iter(), objects.len(), coeffs)
}

fn mean_quantile<'a>(
    objects: impl Iterator<Item = &'a QuantileFunction> + Clone,
    len: usize,
    coeffs: &[f64],
) -> Result<QuantileFunction> {
    let sum = coefficient_sum(len, coeffs)?;
    let first = objects.clone().next().expect("non-empty");
    for f in objects.clone() {
        check_grids(first, f)?;
    }
    let grid = first.grid.clone();
    let raw = accumulate(grid.len(), objects.map(|f| f.values.as_slice()), coeffs, sum);
    let values = isotonic_projection(&raw, grid.weights());
    Ok(QuantileFunction { grid, values })
}

/// A response in one of the supported metric spaces.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricObject {
    Matrix(SymMatrix),
    Quantile(QuantileFunction),
}

impl From<SymMatrix> for MetricObject {
    fn from(m: SymMatrix) -> Self {
        MetricObject::Matrix(m)
    }
}

impl From<QuantileFunction> for MetricObject {
    fn from(f: QuantileFunction) -> Self {
        MetricObject::Quantile(f)
    }
}

impl MetricObject {
    pub fn kind(&self) -> ResponseKind {
        match self {
            MetricObject::Matrix(_) => ResponseKind::Matrix,
            MetricObject::Quantile(_) => ResponseKind::Distribution,
        }
    }

    pub fn as_matrix(&self) -> Option<&SymMatrix> {
        match self {
            MetricObject::Matrix(m) => Some(m),
            MetricObject::Quantile(_) => None,
        }
    }

    pub fn as_quantile(&self) -> Option<&QuantileFunction> {
        match self {
            MetricObject::Quantile(f) => Some(f),
            MetricObject::Matrix(_) => None,
        }
    }

    /// Flat numeric payload: row-major entries or quantile values.
    pub fn values(&self) -> &[f64] {
        match self {
            MetricObject::Matrix(m) => m.entries(),
            MetricObject::Quantile(f) => f.values(),
        }
    }

    /// True when both objects share variant and dimension (or grid).
    pub fn compatible(&self, other: &MetricObject) -> bool {
        match (self, other) {
            (MetricObject::Matrix(a), MetricObject::Matrix(b)) => a.dim == b.dim,
            (MetricObject::Quantile(a), MetricObject::Quantile(b)) => a.grid == b.grid,
            _ => false,
        }
    }

    pub fn distance(&self, other: &MetricObject) -> Result<f64> {
        Ok(self.sq_distance(other)?.sqrt())
    }

    pub fn sq_distance(&self, other: &MetricObject) -> Result<f64> {
        match (self, other) {
            (MetricObject::Matrix(a), MetricObject::Matrix(b)) => frobenius_sq(a, b),
            (MetricObject::Quantile(a), MetricObject::Quantile(b)) => wasserstein_sq(a, b),
            _ => Err(Error::MixedResponses),
        }
    }

    pub fn shifted(&self, shift: f64) -> MetricObject {
        match self {
            MetricObject::Matrix(m) => MetricObject::Matrix(m.shifted(shift)),
            MetricObject::Quantile(f) => MetricObject::Quantile(f.shifted(shift)),
        }
    }
}

/// Weighted Fréchet mean of homogeneous objects with (possibly negative)
/// coefficients.
pub fn weighted_mean(objects: &[MetricObject], coeffs: &[f64]) -> Result<MetricObject> {
    let first = objects
        .first()
        .ok_or_else(|| Error::Shape("weighted mean of an empty collection".into()))?;
    match first {
        MetricObject::Matrix(_) => {
            let items = objects.iter().map(|o| o.as_matrix());
            if items.clone().any(|m| m.is_none()) {
                return Err(Error::MixedResponses);
            }
            mean_matrix(items.map(Option::unwrap), objects.len(), coeffs).map(MetricObject::Matrix)
        }
        MetricObject::Quantile(_) => {
            let items = objects.iter().map(|o| o.as_quantile());
            if items.clone().any(|f| f.is_none()) {
                return Err(Error::MixedResponses);
            }
            mean_quantile(items.map(Option::unwrap), objects.len(), coeffs).map(MetricObject::Quantile)
        }
    }
}
