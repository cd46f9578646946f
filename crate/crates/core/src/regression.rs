//! Global Fréchet regression and its robust, weight-regularized variant.
//!
//! The robust fit minimizes
//!
//! ```text
//! Q(u, w) = sum_i { W_i g_i d^2(Y_i, u) + lambda |1 - W_i| + gamma (1 - W_i)^2 }
//! ```
//!
//! over responses `u` and weights `w` in `[0, 1]^n`, where `g_i` is the
//! leverage of observation `i` at the evaluation point. Minimization alternates
//! the closed-form weight update with the closed-form weighted Fréchet mean,
//! starting from the standard (all weights one) fit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metric::{weighted_mean, MetricObject, DENOMINATOR_FLOOR};

/// Elastic-net tuning parameters `(lambda, gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningPair {
    pub lambda: f64,
    pub gamma: f64,
}

impl TuningPair {
    pub fn new(lambda: f64, gamma: f64) -> Result<Self> {
        if !(lambda >= 0.0 && gamma >= 0.0) || !lambda.is_finite() || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "tuning pair must be finite and nonnegative, got ({lambda}, {gamma})"
            )));
        }
        Ok(TuningPair { lambda, gamma })
    }
}

/// Stopping rule and classification knobs for the alternating fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Stop once consecutive iterates are closer than this in the response metric.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// A weight below `1 - weight_floor_tolerance` counts as an outlier flag.
    pub weight_floor_tolerance: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            epsilon: 1e-6,
            max_iterations: 100,
            weight_floor_tolerance: 1e-10,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || self.max_iterations == 0 || !(self.weight_floor_tolerance >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "invalid fit config: epsilon={}, max_iterations={}, weight_floor_tolerance={}",
                self.epsilon, self.max_iterations, self.weight_floor_tolerance
            )));
        }
        Ok(())
    }
}

/// Outcome of a fit at one evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub evaluation_point: Vec<f64>,
    pub estimate: MetricObject,
    /// Robust weights evaluated at `estimate`.
    pub weights: Vec<f64>,
    pub leverages: Vec<f64>,
    /// `g_i * d^2(Y_i, estimate)`.
    pub weighted_sq_distances: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `d(u^(s+1), u^(s))` for each iteration.
    pub step_sizes: Vec<f64>,
    /// `u^(0), u^(1), ...`; the last element equals `estimate`.
    pub iterates: Vec<MetricObject>,
}

impl FitResult {
    /// Number of weights strictly below `1 - tol`.
    pub fn outlier_count(&self, tol: f64) -> usize {
        self.weights.iter().filter(|&&w| w < 1.0 - tol).count()
    }
}

/// Leverages `g_i = 1 + (X_i - mu)^T Sigma^+ (x - mu)` at evaluation point `x`.
pub fn leverage(data: &Dataset, x: &[f64]) -> Result<Vec<f64>> {
    let p = data.p();
    if x.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: x.len(),
        });
    }
    let mean = data.mean();
    let prec = data.precision();
    let dx: Vec<f64> = x.iter().zip(mean).map(|(a, m)| a - m).collect();
    let v: Vec<f64> = (0..p).map(|j| (0..p).map(|k| prec[(j, k)] * dx[k]).sum()).collect();
    Ok(data
        .covariate_rows()
        .map(|row| {
            1.0 + row
                .iter()
                .zip(mean)
                .zip(&v)
                .map(|((xi, m), vj)| (xi - m) * vj)
                .sum::<f64>()
        })
        .collect())
}

/// Minimizer over `W` in `[0, 1]` of `W r + lambda |1 - W| + gamma (1 - W)^2`.
///
/// Equals 1 for `r <= lambda`, 0 for `r >= lambda + 2 gamma`, and is linear in
/// between. With `gamma = 0` this is a hard threshold with `W = 1` at `r = lambda`.
pub fn adaptive_weight(r: f64, t: TuningPair) -> f64 {
    if r <= t.lambda {
        1.0
    } else if r >= t.lambda + 2.0 * t.gamma {
        0.0
    } else {
        1.0 - (r - t.lambda) / (2.0 * t.gamma)
    }
}

pub fn adaptive_weights(r: &[f64], t: TuningPair) -> Vec<f64> {
    r.iter().map(|&ri| adaptive_weight(ri, t)).collect()
}

/// `sum_i lambda |1 - W_i| + gamma (1 - W_i)^2`.
pub fn profiled_penalty(w: &[f64], t: TuningPair) -> f64 {
    w.iter()
        .map(|&wi| t.lambda * (1.0 - wi).abs() + t.gamma * (1.0 - wi) * (1.0 - wi))
        .sum()
}

/// `g_i d^2(Y_i, u)` for every observation.
pub fn weighted_sq_distances(data: &Dataset, leverages: &[f64], u: &MetricObject) -> Result<Vec<f64>> {
    data.responses()
        .iter()
        .zip(leverages)
        .map(|(y, g)| Ok(g * y.sq_distance(u)?))
        .collect()
}

/// The penalized objective `Q(u, w)` at evaluation point `x`.
pub fn objective(data: &Dataset, x: &[f64], u: &MetricObject, w: &[f64], t: TuningPair) -> Result<f64> {
    let g = leverage(data, x)?;
    objective_with_leverages(data, &g, u, w, t)
}

pub fn objective_with_leverages(
    data: &Dataset,
    leverages: &[f64],
    u: &MetricObject,
    w: &[f64],
    t: TuningPair,
) -> Result<f64> {
    if w.len() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            found: w.len(),
        });
    }
    let r = weighted_sq_distances(data, leverages, u)?;
    let loss: f64 = r.iter().zip(w).map(|(ri, wi)| wi * ri).sum();
    Ok(loss + profiled_penalty(w, t))
}

/// Standard global Fréchet regression at `x` (all weights one).
pub fn fit_standard(data: &Dataset, x: &[f64]) -> Result<FitResult> {
    let g = leverage(data, x)?;
    let u = weighted_mean(data.responses(), &g)?;
    let r = weighted_sq_distances(data, &g, &u)?;
    Ok(FitResult {
        evaluation_point: x.to_vec(),
        estimate: u.clone(),
        weights: vec![1.0; data.n()],
        leverages: g,
        weighted_sq_distances: r,
        iterations: 0,
        converged: true,
        step_sizes: Vec::new(),
        iterates: vec![u],
    })
}

/// Robust fit at `x` by alternating weight and mean updates from the
/// standard fit, until consecutive iterates are within `cfg.epsilon`.
///
/// Running out of iterations is reported through `converged = false`. A
/// weighted coefficient sum at or below [`DENOMINATOR_FLOOR`] is an error.
pub fn fit_robust(data: &Dataset, x: &[f64], t: TuningPair, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    let t = TuningPair::new(t.lambda, t.gamma)?;
    let init = fit_standard(data, x)?;
    let g = init.leverages;
    let mut u = init.estimate;
    let mut r = init.weighted_sq_distances;
    let mut iterates = vec![u.clone()];
    let mut step_sizes = Vec::new();
    let mut converged = false;
    let mut coeffs = vec![0.0; data.n()];

    for _ in 0..cfg.max_iterations {
        for ((c, ri), gi) in coeffs.iter_mut().zip(&r).zip(&g) {
            *c = adaptive_weight(*ri, t) * gi;
        }
        // a non-positive total makes Q(., w) unbounded below in u
        let sum: f64 = coeffs.iter().sum();
        if sum <= DENOMINATOR_FLOOR {
            return Err(Error::NearSingularDenominator { sum });
        }
        let next = weighted_mean(data.responses(), &coeffs)?;
        let step = next.distance(&u)?;
        step_sizes.push(step);
        r = weighted_sq_distances(data, &g, &next)?;
        iterates.push(next.clone());
        u = next;
        if step < cfg.epsilon {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        evaluation_point: x.to_vec(),
        weights: adaptive_weights(&r, t),
        estimate: u,
        leverages: g,
        weighted_sq_distances: r,
        iterations: step_sizes.len(),
        converged,
        step_sizes,
        iterates,
    })
}

/// Independent robust fits at each point; output order follows `points`.
pub fn predict(data: &Dataset, t: TuningPair, cfg: &FitConfig, points: &[Vec<f64>]) -> Result<Vec<FitResult>> {
    points.par_iter().map(|x| fit_robust(data, x, t, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::SymMatrix;

    fn univariate(xs: &[f64], ys: &[SymMatrix]) -> Dataset {
        Dataset::new(
            xs.iter().map(|&x| vec![x]).collect(),
            ys.iter().cloned().map(MetricObject::Matrix).collect(),
        )
        .unwrap()
    }

    #[test]
    fn leverage_hand_example() {
        let d = univariate(&[0.0, 1.0], &[SymMatrix::identity(2), SymMatrix::ones(2)]);
        let g = leverage(&d, &[1.0]).unwrap();
        // mu = 0.5, sigma = 0.5: g = 1 + (X - 0.5) * 2 * 0.5
        assert!((g[0] - 0.5).abs() < 1e-15 && (g[1] - 1.5).abs() < 1e-15, "{g:?}");
    }

    #[test]
    fn leverage_at_mean_is_one() {
        let d = univariate(&[0.1, 0.4, 0.9], &vec![SymMatrix::identity(2); 3]);
        let g = leverage(&d, d.mean()).unwrap();
        assert!(g.iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert!(leverage(&d, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn weight_branches() {
        let t = TuningPair::new(2.0, 1.0).unwrap();
        assert_eq!(adaptive_weight(2.0, t), 1.0);
        assert_eq!(adaptive_weight(-5.0, t), 1.0);
        assert_eq!(adaptive_weight(3.0, t), 0.5);
        assert_eq!(adaptive_weight(4.0, t), 0.0);
        assert_eq!(adaptive_weight(40.0, t), 0.0);
        let hard = TuningPair::new(2.0, 0.0).unwrap();
        assert_eq!(adaptive_weight(2.0, hard), 1.0);
        assert_eq!(adaptive_weight(2.0 + 1e-12, hard), 0.0);
    }

    #[test]
    fn penalty_bounds() {
        let t = TuningPair::new(0.3, 0.7).unwrap();
        assert_eq!(profiled_penalty(&[1.0; 4], t), 0.0);
        assert!((profiled_penalty(&[0.0; 4], t) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn objective_special_weights() {
        let d = univariate(
            &[0.0, 0.5, 1.0],
            &[
                SymMatrix::identity(2),
                SymMatrix::ones(2),
                SymMatrix::ones(2).shifted(1.0),
            ],
        );
        let x = [0.2];
        let u = MetricObject::Matrix(SymMatrix::identity(2));
        let t = TuningPair::new(0.5, 0.25).unwrap();
        let g = leverage(&d, &x).unwrap();
        let plain: f64 = d
            .responses()
            .iter()
            .zip(&g)
            .map(|(y, gi)| gi * y.sq_distance(&u).unwrap())
            .sum();
        assert!((objective(&d, &x, &u, &[1.0; 3], t).unwrap() - plain).abs() < 1e-12);
        assert!((objective(&d, &x, &u, &[0.0; 3], t).unwrap() - 3.0 * 0.75).abs() < 1e-12);
    }

    #[test]
    fn identical_responses_fit_exactly() {
        let y = SymMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let d = univariate(&[0.0, 0.3, 0.8], &vec![y.clone(); 3]);
        let fit = fit_standard(&d, &[0.7]).unwrap();
        let est = fit.estimate.as_matrix().unwrap();
        for (a, b) in est.entries().iter().zip(y.entries()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn large_lambda_stops_after_one_iteration() {
        let d = univariate(
            &[0.0, 0.5, 1.0, 0.2],
            &[
                SymMatrix::identity(2),
                SymMatrix::ones(2),
                SymMatrix::ones(2).shifted(3.0),
                SymMatrix::identity(2).shifted(-1.0),
            ],
        );
        let t = TuningPair::new(1e9, 0.0).unwrap();
        let fit = fit_robust(&d, &[0.4], t, &FitConfig::default()).unwrap();
        let std = fit_standard(&d, &[0.4]).unwrap();
        assert_eq!(fit.iterations, 1);
        assert!(fit.converged);
        assert_eq!(fit.estimate, std.estimate);
        assert!(fit.weights.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn tiny_tuning_zeroes_everything() {
        let d = univariate(
            &[0.0, 0.5, 1.0],
            &[
                SymMatrix::identity(2),
                SymMatrix::ones(2),
                SymMatrix::ones(2).shifted(3.0),
            ],
        );
        let t = TuningPair::new(0.0, 0.0).unwrap();
        let err = fit_robust(&d, &[0.5], t, &FitConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NearSingularDenominator { .. }));
    }

    #[test]
    fn invalid_inputs() {
        assert!(TuningPair::new(-1.0, 0.0).is_err());
        assert!(TuningPair::new(1.0, f64::NAN).is_err());
        let cfg = FitConfig {
            max_iterations: 0,
            ..FitConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn negative_weight_mass_is_degenerate() {
        // at x = -5 the leverages are (7, 1, -5); zeroing the first two leaves -5
        let d = univariate(
            &[0.0, 1.0, 2.0],
            &[
                SymMatrix::ones(2).shifted(99.0),
                SymMatrix::ones(2).shifted(-1.0),
                SymMatrix::ones(2).shifted(-1.0),
            ],
        );
        let err = fit_robust(&d, &[-5.0], TuningPair::new(1.0, 0.0).unwrap(), &FitConfig::default()).unwrap_err();
        assert_eq!(err, Error::NearSingularDenominator { sum: -5.0 });
    }
}
