//! BIC-based selection of the elastic-net tuning pair.
//!
//! Each candidate `(lambda, gamma)` is scored by fitting the robust model at
//! every training covariate. Observation `i` contributes its own weight and
//! residual from the fit at `X_i`:
//!
//! ```text
//! BIC = n log( sum_i W_i d^2(Y_i, u(X_i)) / sum_i W_i ) + k (log n + 1)
//! ```
//!
//! where `k` counts weights below one. Pairs flagging more than 30% of the
//! sample are excluded from selection.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metric::DENOMINATOR_FLOOR;
use crate::regression::{fit_robust, fit_standard, FitConfig, TuningPair};

/// Left end of the equally spaced base grid on `[LAMBDA_GRID_START, 1]`.
pub const LAMBDA_GRID_START: f64 = 1e-7;

/// Candidate grid recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lambda_count: usize,
    pub exponent: f64,
    /// Each lambda is paired with `ratio * lambda` for every ratio.
    pub gamma_ratios: Vec<f64>,
    /// Always include `gamma = 0`, even if absent from `gamma_ratios`.
    pub include_zero_gamma: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lambda_count: 20,
            exponent: 0.8,
            gamma_ratios: vec![0.0, 0.25, 0.5, 1.0, 2.0],
            include_zero_gamma: true,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_count < 2 {
            return Err(Error::InvalidParameter("lambda_count must be at least 2".into()));
        }
        if !(self.exponent > 0.0) || !self.exponent.is_finite() {
            return Err(Error::InvalidParameter("grid exponent must be positive".into()));
        }
        if self.gamma_ratios.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(Error::InvalidParameter("gamma ratios must be nonnegative".into()));
        }
        if self.gamma_ratios.is_empty() && !self.include_zero_gamma {
            return Err(Error::InvalidParameter("no gamma candidates".into()));
        }
        Ok(())
    }
}

/// One scored candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicRecord {
    pub pair: TuningPair,
    /// `+inf` for degenerate or failed pairs.
    pub bic: f64,
    pub k_hat: usize,
    /// Weighted mean squared residual; the argument of the logarithm.
    pub mean_weighted_residual: f64,
    pub feasible: bool,
    /// Weight of observation `i` in its own fit at `X_i`.
    pub diagonal_weights: Vec<f64>,
}

/// Largest number of flagged observations a selectable pair may have.
pub fn max_outliers(n: usize) -> usize {
    (3 * n) / 10
}

/// Smallest lambda at which no weight drops below one in any fit evaluated
/// at a training covariate: the maximum over evaluation points `X_i` and
/// observations `j` of `g(X_j, X_i) d^2(Y_j, u_std(X_i))`.
pub fn lambda_max(data: &Dataset, _cfg: &FitConfig) -> Result<f64> {
    let per_point: Vec<f64> = (0..data.n())
        .into_par_iter()
        .map(|i| {
            let fit = fit_standard(data, data.covariate(i))?;
            Ok(fit
                .weighted_sq_distances
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max))
        })
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().fold(0.0, f64::max))
}

/// `lambda_max * x_i^exponent` over the equally spaced `x_i` in
/// `[LAMBDA_GRID_START, 1]`, strictly increasing when `lambda_max > 0`.
pub fn lambda_sequence(lambda_max: f64, spec: &GridSpec) -> Vec<f64> {
    let m = spec.lambda_count;
    (0..m)
        .map(|i| {
            let x = if i + 1 == m {
                1.0
            } else {
                LAMBDA_GRID_START + (1.0 - LAMBDA_GRID_START) * i as f64 / (m - 1) as f64
            };
            lambda_max * x.powf(spec.exponent)
        })
        .collect()
}

/// Cross product of the lambda sequence with `ratio * lambda`, deduplicated.
pub fn grid_from_lambda_max(lambda_max: f64, spec: &GridSpec) -> Result<Vec<TuningPair>> {
    spec.validate()?;
    let mut ratios = spec.gamma_ratios.clone();
    if spec.include_zero_gamma && !ratios.contains(&0.0) {
        ratios.insert(0, 0.0);
    }
    let mut out: Vec<TuningPair> = Vec::new();
    for lambda in lambda_sequence(lambda_max, spec) {
        for r in &ratios {
            let pair = TuningPair::new(lambda, r * lambda)?;
            if !out.contains(&pair) {
                out.push(pair);
            }
        }
    }
    Ok(out)
}

pub fn build_grid(data: &Dataset, spec: &GridSpec, cfg: &FitConfig) -> Result<Vec<TuningPair>> {
    spec.validate()?;
    grid_from_lambda_max(lambda_max(data, cfg)?, spec)
}

fn score(data: &Dataset, t: TuningPair, cfg: &FitConfig) -> Result<BicRecord> {
    let n = data.n();
    let diag: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let fit = fit_robust(data, data.covariate(i), t, cfg)?;
            let residual = data.responses()[i].sq_distance(&fit.estimate)?;
            Ok((fit.weights[i], residual))
        })
        .collect::<Result<_>>()?;
    let weights: Vec<f64> = diag.iter().map(|d| d.0).collect();
    let k_hat = weights
        .iter()
        .filter(|&&w| w < 1.0 - cfg.weight_floor_tolerance)
        .count();
    let sum_w: f64 = weights.iter().sum();
    let sum_wr: f64 = diag.iter().map(|(w, r)| w * r).sum();
    let mean = if sum_w > DENOMINATOR_FLOOR {
        sum_wr / sum_w
    } else {
        f64::NAN
    };
    let degenerate = !(sum_w > DENOMINATOR_FLOOR) || !(sum_wr > 0.0);
    let bic = if degenerate {
        f64::INFINITY
    } else {
        n as f64 * mean.ln() + k_hat as f64 * ((n as f64).ln() + 1.0)
    };
    Ok(BicRecord {
        pair: t,
        bic,
        k_hat,
        mean_weighted_residual: mean,
        feasible: !degenerate && k_hat <= max_outliers(n),
        diagonal_weights: weights,
    })
}

/// BIC of one pair. Degenerate pairs (vanishing weight mass or zero
/// weighted residual) are reported as [`Error::DegenerateBic`].
pub fn bic_score(data: &Dataset, t: TuningPair, cfg: &FitConfig) -> Result<BicRecord> {
    let rec = score(data, t, cfg)?;
    if rec.bic.is_infinite() {
        return Err(Error::DegenerateBic(format!(
            "pair ({}, {}): weight sum {}, weighted residual mean {}",
            t.lambda,
            t.gamma,
            rec.diagonal_weights.iter().sum::<f64>(),
            rec.mean_weighted_residual
        )));
    }
    Ok(rec)
}

/// Orders candidates: lower BIC first, then larger lambda, then larger gamma.
fn preference(a: &BicRecord, b: &BicRecord) -> Ordering {
    a.bic
        .total_cmp(&b.bic)
        .then(b.pair.lambda.total_cmp(&a.pair.lambda))
        .then(b.pair.gamma.total_cmp(&a.pair.gamma))
}

/// Scores every pair of `grid` and returns the preferred feasible one plus
/// the full trace (in grid order). Failed fits become infeasible records.
pub fn select_from_grid(data: &Dataset, grid: &[TuningPair], cfg: &FitConfig) -> Result<(TuningPair, Vec<BicRecord>)> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty tuning grid".into()));
    }
    cfg.validate()?;
    let n = data.n();
    let records: Vec<BicRecord> = grid
        .par_iter()
        .map(|&t| {
            score(data, t, cfg).unwrap_or_else(|_| BicRecord {
                pair: t,
                bic: f64::INFINITY,
                k_hat: n,
                mean_weighted_residual: f64::NAN,
                feasible: false,
                diagonal_weights: Vec::new(),
            })
        })
        .collect();
    let best = records
        .iter()
        .filter(|r| r.feasible)
        .min_by(|a, b| preference(a, b))
        .ok_or(Error::NoFeasiblePair)?;
    Ok((best.pair, records))
}

pub fn select_tuning(data: &Dataset, spec: &GridSpec, cfg: &FitConfig) -> Result<(TuningPair, Vec<BicRecord>)> {
    let grid = build_grid(data, spec, cfg)?;
    select_from_grid(data, &grid, cfg)
}
