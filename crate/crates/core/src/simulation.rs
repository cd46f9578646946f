//! Synthetic data generators, contamination, error metrics, seeded Monte
//! Carlo replication and leave-one-out evaluation.
//!
//! Replicate `r` of a scenario draws from `ChaCha20Rng::seed_from_u64(seed)`
//! switched to stream `r`, so every replicate is reproducible on its own and
//! results do not depend on thread scheduling.

use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metric::{MetricObject, QuantileFunction, QuantileGrid, SymMatrix};
use crate::regression::{fit_robust, fit_standard, FitConfig, TuningPair};
use crate::tuning::{lambda_max, select_tuning, BicRecord, GridSpec};

/// Data-generating process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dgp {
    /// Off-diagonal entries `Beta(X, 1 - X)`, unit diagonal.
    MatrixBeta,
    /// Entrywise `exp(0.2 Z + D(X))` with an oscillating mean.
    MatrixLogNormal,
    /// Normal quantile functions with covariate-driven location and scale.
    DistributionNormal,
}

impl std::str::FromStr for Dgp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "matrix_beta" | "dgp1" | "i" => Ok(Dgp::MatrixBeta),
            "matrix_lognormal" | "dgp2" | "ii" => Ok(Dgp::MatrixLogNormal),
            "distribution_normal" | "distribution" => Ok(Dgp::DistributionNormal),
            other => Err(Error::InvalidParameter(format!("unknown dgp `{other}`"))),
        }
    }
}

impl std::fmt::Display for Dgp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Dgp::MatrixBeta => "matrix_beta",
            Dgp::MatrixLogNormal => "matrix_lognormal",
            Dgp::DistributionNormal => "distribution_normal",
        })
    }
}

/// Parameters of the distribution-response generator.
///
/// `mu_i ~ N(mu0 + beta X, v1)` and `sigma_i ~ Gamma(shape (s0 + gs X)^2 / v2,
/// scale v2 / (s0 + gs X))`, so `E sigma_i = s0 + gs X` and `Var sigma_i = v2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistParams {
    pub mu0: f64,
    pub beta: f64,
    pub v1: f64,
    pub sigma0: f64,
    pub gamma_sigma: f64,
    pub v2: f64,
}

impl Default for DistParams {
    fn default() -> Self {
        DistParams {
            mu0: 0.0,
            beta: 3.0,
            v1: 0.25,
            sigma0: 3.0,
            gamma_sigma: 0.5,
            v2: 0.25,
        }
    }
}

impl DistParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.v1 > 0.0
            && self.v2 > 0.0
            && self.sigma0 > 0.0
            && self.sigma0 + self.gamma_sigma > 0.0
            && [self.mu0, self.beta, self.gamma_sigma].iter().all(|v| v.is_finite());
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "invalid distribution parameters {self:?}"
            )));
        }
        Ok(())
    }
}

/// `(0.1, 0.2, 0.3, 0.4, 0.5, 0, ..., 0)` of length `p`.
pub fn default_dgp2_beta(p: usize) -> Result<Vec<f64>> {
    if p < 5 {
        return Err(Error::InvalidParameter(format!("DGP (II) needs p >= 5, got {p}")));
    }
    Ok((0..p).map(|j| if j < 5 { 0.1 * (j + 1) as f64 } else { 0.0 }).collect())
}

/// Known targets for a generated sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthBundle {
    pub covariates: Vec<Vec<f64>>,
    /// Conditional Fréchet means (matrices) or realized quantile functions.
    pub targets: Vec<MetricObject>,
    /// Realized `(mu_i, sigma_i)` for the distribution generator.
    pub latent: Option<Vec<(f64, f64)>>,
}

struct Sample {
    covariates: Vec<Vec<f64>>,
    responses: Vec<MetricObject>,
    truth: TruthBundle,
}

impl Sample {
    fn into_parts(self) -> Result<(Dataset, TruthBundle)> {
        Ok((Dataset::new(self.covariates, self.responses)?, self.truth))
    }
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let x: f64 = rng.random();
        if x > 0.0 && x < 1.0 {
            return x;
        }
    }
}

/// `(1 - x) I + x J`: unit diagonal, off-diagonal `x`.
pub fn dgp1_target(q: usize, x: f64) -> SymMatrix {
    SymMatrix::identity(q)
        .combine(1.0 - x, &SymMatrix::ones(q), x)
        .expect("same dimension")
}

fn sample_dgp1<R: Rng + ?Sized>(n: usize, q: usize, rng: &mut R) -> Result<Sample> {
    if q < 2 {
        return Err(Error::InvalidParameter(format!("q must be at least 2, got {q}")));
    }
    let mut covariates = Vec::with_capacity(n);
    let mut responses = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let x = open_unit(rng);
        let beta = Beta::new(x, 1.0 - x).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut entries = vec![1.0; q * q];
        for j in 0..q {
            for k in (j + 1)..q {
                let v = beta.sample(rng);
                entries[j * q + k] = v;
                entries[k * q + j] = v;
            }
        }
        covariates.push(vec![x]);
        responses.push(MetricObject::Matrix(SymMatrix::new(q, entries)?));
        targets.push(MetricObject::Matrix(dgp1_target(q, x)));
    }
    Ok(Sample {
        truth: TruthBundle {
            covariates: covariates.clone(),
            targets,
            latent: None,
        },
        covariates,
        responses,
    })
}

/// Univariate `X ~ U(0, 1)` with `q x q` responses whose off-diagonal entries
/// are `Beta(X, 1 - X)` (conditional mean `X`) and whose diagonal is one.
pub fn gen_dgp1<R: Rng + ?Sized>(n: usize, q: usize, rng: &mut R) -> Result<(Dataset, TruthBundle)> {
    sample_dgp1(n, q, rng)?.into_parts()
}

/// Entrywise conditional mean of the log-normal generator at `x`.
pub fn dgp2_target(q: usize, beta: &[f64], x: &[f64]) -> SymMatrix {
    let c = (4.0 * std::f64::consts::PI * dot(beta, x)).cos();
    let off = 0.01f64.exp() * if c.abs() < 1e-12 { 1.0 } else { c.exp_m1() / c };
    let diag = 1.02f64.exp();
    let mut entries = vec![off; q * q];
    for j in 0..q {
        entries[j * q + j] = diag;
    }
    SymMatrix::new(q, entries).expect("constant off-diagonal is symmetric")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sample_dgp2<R: Rng + ?Sized>(n: usize, q: usize, beta: &[f64], rng: &mut R) -> Result<Sample> {
    if q < 2 {
        return Err(Error::InvalidParameter(format!("q must be at least 2, got {q}")));
    }
    let p = beta.len();
    if p == 0 {
        return Err(Error::InvalidParameter("empty beta".into()));
    }
    let diag_noise = Normal::new(0.0, 1.0).expect("valid");
    let off_noise = Normal::new(0.0, 0.5f64.sqrt()).expect("valid");
    let mut covariates = Vec::with_capacity(n);
    let mut responses = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
        let c = (4.0 * std::f64::consts::PI * dot(beta, &x)).cos();
        let mut entries = vec![0.0; q * q];
        for j in 0..q {
            entries[j * q + j] = (0.2 * diag_noise.sample(rng) + 1.0_f64).exp();
            for k in (j + 1)..q {
                let z = off_noise.sample(rng);
                let u: f64 = rng.random();
                let v: f64 = (0.2 * z + u * c).exp();
                entries[j * q + k] = v;
                entries[k * q + j] = v;
            }
        }
        targets.push(MetricObject::Matrix(dgp2_target(q, beta, &x)));
        responses.push(MetricObject::Matrix(SymMatrix::new(q, entries)?));
        covariates.push(x);
    }
    Ok(Sample {
        truth: TruthBundle {
            covariates: covariates.clone(),
            targets,
            latent: None,
        },
        covariates,
        responses,
    })
}

/// `X ~ U(0, 1)^p`, `Y_jk = exp(0.2 Z_jk + D_jk(X))` with `D_jj = 1` and
/// `D_jk = U_jk cos(4 pi beta^T X)`; `Z_jj ~ N(0, 1)`, `Z_jk ~ N(0, 1/2)`.
pub fn gen_dgp2<R: Rng + ?Sized>(n: usize, q: usize, beta: &[f64], rng: &mut R) -> Result<(Dataset, TruthBundle)> {
    sample_dgp2(n, q, beta, rng)?.into_parts()
}

/// Standard normal quantiles on the grid levels.
pub fn normal_quantiles(grid: &QuantileGrid) -> Vec<f64> {
    let phi = StdNormal::new(0.0, 1.0).expect("valid");
    grid.levels().iter().map(|&z| phi.inverse_cdf(z)).collect()
}

fn sample_dist<R: Rng + ?Sized>(n: usize, params: &DistParams, rng: &mut R) -> Result<Sample> {
    params.validate()?;
    let grid = QuantileGrid::standard();
    let z = normal_quantiles(&grid);
    let mut covariates = Vec::with_capacity(n);
    let mut responses = Vec::with_capacity(n);
    let mut latent = Vec::with_capacity(n);
    for _ in 0..n {
        let x: f64 = rng.random();
        let mu = Normal::new(params.mu0 + params.beta * x, params.v1.sqrt())
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .sample(rng);
        let m = params.sigma0 + params.gamma_sigma * x;
        let sigma = Gamma::new(m * m / params.v2, params.v2 / m)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .sample(rng);
        let values = z.iter().map(|zj| mu + sigma * zj).collect();
        covariates.push(vec![x]);
        responses.push(MetricObject::Quantile(QuantileFunction::new(grid.clone(), values)?));
        latent.push((mu, sigma));
    }
    Ok(Sample {
        truth: TruthBundle {
            covariates: covariates.clone(),
            targets: responses.clone(),
            latent: Some(latent),
        },
        covariates,
        responses,
    })
}

/// Normal distributions on the 81-point grid with latent location and scale
/// driven by a uniform covariate. The truth is the realized quantile vectors.
pub fn gen_dist_dgp<R: Rng + ?Sized>(n: usize, params: &DistParams, rng: &mut R) -> Result<(Dataset, TruthBundle)> {
    sample_dist(n, params, rng)?.into_parts()
}

/// `round(proportion * n)` with halves rounded up.
pub fn contamination_count(n: usize, proportion: f64) -> usize {
    ((proportion * n as f64) + 0.5).floor() as usize
}

/// Adds `shift` to every entry of a uniformly chosen `round(proportion * n)`
/// responses. Returns the new dataset and the sorted contaminated indices.
pub fn contaminate<R: Rng + ?Sized>(
    data: &Dataset,
    proportion: f64,
    shift: f64,
    rng: &mut R,
) -> Result<(Dataset, Vec<usize>)> {
    if !(0.0..1.0).contains(&proportion) {
        return Err(Error::InvalidParameter(format!(
            "proportion {proportion} not in [0, 1)"
        )));
    }
    if !(shift >= 0.0) || !shift.is_finite() {
        return Err(Error::InvalidParameter(format!("shift {shift} must be nonnegative")));
    }
    let n = data.n();
    let count = contamination_count(n, proportion).min(n);
    if count == 0 {
        return Ok((data.clone(), Vec::new()));
    }
    let mut idx = sample(rng, n, count).into_vec();
    idx.sort_unstable();
    let mut responses = data.responses().to_vec();
    for &i in &idx {
        responses[i] = responses[i].shifted(shift);
    }
    Ok((data.with_responses(responses)?, idx))
}

/// `(1/n) sum_i ||M_hat_i - M_i||_F^2`.
pub fn mse_matrix(estimates: &[SymMatrix], truths: &[SymMatrix]) -> Result<f64> {
    if estimates.len() != truths.len() || estimates.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            found: estimates.len(),
        });
    }
    let mut total = 0.0;
    for (a, b) in estimates.iter().zip(truths) {
        total += crate::metric::frobenius_distance(a, b)?.powi(2);
    }
    Ok(total / estimates.len() as f64)
}

/// `(1/n) sum_i int (F_hat_i^{-1} - F_i^{-1})^2`, trapezoid rule on the grid.
pub fn mise_distribution(estimates: &[QuantileFunction], truths: &[QuantileFunction]) -> Result<f64> {
    if estimates.len() != truths.len() || estimates.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            found: estimates.len(),
        });
    }
    let mut total = 0.0;
    for (a, b) in estimates.iter().zip(truths) {
        total += crate::metric::wasserstein_distance(a, b)?.powi(2);
    }
    Ok(total / estimates.len() as f64)
}

/// Mean squared metric distance; MSE for matrices, MISE for distributions.
pub fn mean_sq_error(estimates: &[MetricObject], truths: &[MetricObject]) -> Result<f64> {
    if estimates.len() != truths.len() || estimates.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            found: estimates.len(),
        });
    }
    let mut total = 0.0;
    for (a, b) in estimates.iter().zip(truths) {
        total += a.sq_distance(b)?;
    }
    Ok(total / estimates.len() as f64)
}

/// Parameters of every generator, only the active one is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DgpParams {
    pub dist: DistParams,
    /// Coefficients of the log-normal generator; `None` means the default
    /// `(0.1, ..., 0.5, 0, ...)` of length `p`.
    pub dgp2_beta: Option<Vec<f64>>,
}

/// A simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub dgp: Dgp,
    pub n: usize,
    pub q: usize,
    pub p: usize,
    pub contamination_proportion: f64,
    pub shift: f64,
    pub n_test: usize,
    pub replications: usize,
    pub seed: u64,
    pub dgp_params: DgpParams,
    pub grid: GridSpec,
    pub fit: FitConfig,
}

impl ScenarioSpec {
    /// Defaults for a generator: `q = 8` for the beta generator, `q = p = 10`
    /// for the log-normal one, `n_test = n`.
    pub fn new(dgp: Dgp, n: usize) -> Self {
        let (q, p) = match dgp {
            Dgp::MatrixBeta => (8, 1),
            Dgp::MatrixLogNormal => (10, 10),
            Dgp::DistributionNormal => (0, 1),
        };
        ScenarioSpec {
            dgp,
            n,
            q,
            p,
            contamination_proportion: 0.0,
            shift: 0.0,
            n_test: n,
            replications: 100,
            seed: 0,
            dgp_params: DgpParams::default(),
            grid: GridSpec::default(),
            fit: FitConfig::default(),
        }
    }

    pub fn with_contamination(mut self, proportion: f64, shift: f64) -> Self {
        self.contamination_proportion = proportion;
        self.shift = shift;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter("n must be at least 2".into()));
        }
        if self.n_test == 0 || self.replications == 0 {
            return Err(Error::InvalidParameter(
                "n_test and replications must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.contamination_proportion) || !(self.shift >= 0.0) {
            return Err(Error::InvalidParameter("invalid contamination".into()));
        }
        self.grid.validate()?;
        self.fit.validate()?;
        match self.dgp {
            Dgp::MatrixBeta | Dgp::MatrixLogNormal if self.q < 2 => {
                Err(Error::InvalidParameter("q must be at least 2".into()))
            }
            Dgp::MatrixLogNormal => self.dgp2_beta().map(|_| ()),
            Dgp::DistributionNormal => self.dgp_params.dist.validate(),
            _ => Ok(()),
        }
    }

    fn dgp2_beta(&self) -> Result<Vec<f64>> {
        match &self.dgp_params.dgp2_beta {
            Some(b) if b.len() == self.p => Ok(b.clone()),
            Some(b) => Err(Error::DimensionMismatch {
                expected: self.p,
                found: b.len(),
            }),
            None => default_dgp2_beta(self.p),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Sample> {
        match self.dgp {
            Dgp::MatrixBeta => sample_dgp1(n, self.q, rng),
            Dgp::MatrixLogNormal => sample_dgp2(n, self.q, &self.dgp2_beta()?, rng),
            Dgp::DistributionNormal => sample_dist(n, &self.dgp_params.dist, rng),
        }
    }

    /// Training dataset and its truth for this scenario's generator.
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<(Dataset, TruthBundle)> {
        self.sample(n, rng)?.into_parts()
    }
}

/// Generator for replicate `replicate` of a run seeded with `seed`.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Outcome of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateReport {
    pub replicate: usize,
    /// MSE (matrices) or MISE (distributions) of the standard fit.
    pub error_standard: f64,
    pub error_robust: f64,
    pub selected: TuningPair,
    pub k_hat: usize,
    pub lambda_max: f64,
    pub contaminated: usize,
    /// Contaminated observations whose own-fit weight is exactly zero.
    pub contaminated_zero_weight: usize,
    /// Robust test fits that hit the iteration cap.
    pub unconverged_fits: usize,
    /// Wall-clock seconds; not part of equality-sensitive outputs.
    #[serde(skip)]
    pub runtime_secs: f64,
}

/// Mean and Monte Carlo standard error (`sd / sqrt(m)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let m = values.len();
        if m == 0 {
            return Summary {
                mean: f64::NAN,
                se: f64::NAN,
                count: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / m as f64;
        let se = if m < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
            (var / m as f64).sqrt()
        };
        Summary { mean, se, count: m }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioAggregate {
    pub standard: Summary,
    pub robust: Summary,
    pub lambda: Summary,
    pub gamma: Summary,
    pub k_hat: Summary,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub spec: ScenarioSpec,
    pub replicates: Vec<ReplicateReport>,
    /// `(replicate, error code)` for replicates excluded from the aggregate.
    pub failures: Vec<(usize, String)>,
    pub aggregate: ScenarioAggregate,
}

fn run_replicate(spec: &ScenarioSpec, replicate: usize) -> Result<ReplicateReport> {
    let start = Instant::now();
    let mut rng = replicate_rng(spec.seed, replicate as u64);
    let (clean, _) = spec.generate(spec.n, &mut rng)?;
    let (train, contaminated) = contaminate(&clean, spec.contamination_proportion, spec.shift, &mut rng)?;
    let test = spec.sample(spec.n_test, &mut rng)?.truth;

    let lmax = lambda_max(&train, &spec.fit)?;
    let (pair, records) = select_tuning(&train, &spec.grid, &spec.fit)?;
    let record: &BicRecord = records
        .iter()
        .find(|r| r.pair == pair)
        .expect("selected pair is in the trace");

    let fits: Vec<(MetricObject, MetricObject, bool)> = test
        .covariates
        .par_iter()
        .map(|x| {
            let std = fit_standard(&train, x)?;
            let rob = fit_robust(&train, x, pair, &spec.fit)?;
            Ok((std.estimate, rob.estimate, rob.converged))
        })
        .collect::<Result<_>>()?;
    let (std_est, rob_est): (Vec<_>, Vec<_>) = fits.iter().map(|(s, r, _)| (s.clone(), r.clone())).unzip();

    Ok(ReplicateReport {
        replicate,
        error_standard: mean_sq_error(&std_est, &test.targets)?,
        error_robust: mean_sq_error(&rob_est, &test.targets)?,
        selected: pair,
        k_hat: record.k_hat,
        lambda_max: lmax,
        contaminated: contaminated.len(),
        contaminated_zero_weight: contaminated
            .iter()
            .filter(|&&i| record.diagonal_weights[i] == 0.0)
            .count(),
        unconverged_fits: fits.iter().filter(|f| !f.2).count(),
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

/// Runs every replicate of `spec` and aggregates the successful ones.
/// Replicates without a feasible tuning pair, or with a degenerate robust
/// test fit, are listed in `failures` instead.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioReport> {
    spec.validate()?;
    let outcomes: Vec<Result<ReplicateReport>> = (0..spec.replications)
        .into_par_iter()
        .map(|r| run_replicate(spec, r))
        .collect();
    let mut replicates = Vec::new();
    let mut failures = Vec::new();
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(rep) => replicates.push(rep),
            Err(e @ (Error::NoFeasiblePair | Error::NearSingularDenominator { .. })) => {
                failures.push((r, e.code().to_string()))
            }
            Err(e) => return Err(e),
        }
    }
    let collect = |f: &dyn Fn(&ReplicateReport) -> f64| -> Vec<f64> { replicates.iter().map(f).collect() };
    let aggregate = ScenarioAggregate {
        standard: Summary::of(&collect(&|r| r.error_standard)),
        robust: Summary::of(&collect(&|r| r.error_robust)),
        lambda: Summary::of(&collect(&|r| r.selected.lambda)),
        gamma: Summary::of(&collect(&|r| r.selected.gamma)),
        k_hat: Summary::of(&collect(&|r| r.k_hat as f64)),
        failed: failures.len(),
    };
    Ok(ScenarioReport {
        spec: spec.clone(),
        replicates,
        failures,
        aggregate,
    })
}

/// Which observations may be held out.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum HoldoutPolicy {
    #[default]
    All,
    /// Skip the listed (e.g. contaminated) indices.
    Exclude(Vec<usize>),
}

impl HoldoutPolicy {
    pub fn admits(&self, i: usize) -> bool {
        match self {
            HoldoutPolicy::All => true,
            HoldoutPolicy::Exclude(idx) => !idx.contains(&i),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooPoint {
    pub index: usize,
    pub error_standard: f64,
    pub error_robust: f64,
    pub pair: TuningPair,
    /// True when no feasible pair existed and the standard fit was used.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooReport {
    pub points: Vec<LooPoint>,
    pub standard: Summary,
    pub robust: Summary,
    pub fallbacks: usize,
    /// Held-out indices whose robust fit was degenerate, with the error code.
    pub failures: Vec<(usize, String)>,
}

/// Holds out each admissible observation, tunes and fits on the rest, and
/// scores the squared distance of both predictions to the held-out response.
///
/// When the remainder admits no feasible tuning pair (for example all
/// residuals are zero) the robust fit uses `lambda = lambda_max, gamma = 0`,
/// which reproduces the standard fit. Indices where the robust fit hits a
/// near-singular denominator are listed in `failures` and left out of the
/// summaries.
pub fn leave_one_out(data: &Dataset, spec: &GridSpec, cfg: &FitConfig, policy: &HoldoutPolicy) -> Result<LooReport> {
    if data.n() < 3 {
        return Err(Error::InvalidParameter("leave-one-out needs n >= 3".into()));
    }
    let admissible: Vec<usize> = (0..data.n()).filter(|&i| policy.admits(i)).collect();
    if admissible.is_empty() {
        return Err(Error::InvalidParameter("no admissible holdout index".into()));
    }
    let outcomes: Vec<std::result::Result<LooPoint, (usize, String)>> = admissible
        .par_iter()
        .map(|&i| {
            let train = data.without(i)?;
            let x = data.covariate(i);
            let y = &data.responses()[i];
            let (pair, fallback) = match select_tuning(&train, spec, cfg) {
                Ok((pair, _)) => (pair, false),
                Err(Error::NoFeasiblePair) => (TuningPair::new(lambda_max(&train, cfg)?, 0.0)?, true),
                Err(e) => return Err(e),
            };
            let std = fit_standard(&train, x)?;
            let rob = match fit_robust(&train, x, pair, cfg) {
                Ok(f) => f,
                Err(e @ Error::NearSingularDenominator { .. }) => return Ok(Err((i, e.code().to_string()))),
                Err(e) => return Err(e),
            };
            Ok(Ok(LooPoint {
                index: i,
                error_standard: y.sq_distance(&std.estimate)?,
                error_robust: y.sq_distance(&rob.estimate)?,
                pair,
                fallback,
            }))
        })
        .collect::<Result<_>>()?;
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(p) => points.push(p),
            Err(f) => failures.push(f),
        }
    }
    let std: Vec<f64> = points.iter().map(|p| p.error_standard).collect();
    let rob: Vec<f64> = points.iter().map(|p| p.error_robust).collect();
    Ok(LooReport {
        standard: Summary::of(&std),
        robust: Summary::of(&rob),
        fallbacks: points.iter().filter(|p| p.fallback).count(),
        points,
        failures,
    })
}
