//! Run configuration: a `key = value` text file plus command-line overrides.
//!
//! Keys use the long flag names (`max-iter`, `gamma-ratios`, ...); underscores
//! are accepted in place of dashes. Lines starting with `#` are comments and an
//! empty value leaves the key unset. [`RunConfig::to_text`] writes every key, so
//! the echoed file reproduces the run.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metric::ResponseKind;
use crate::regression::{FitConfig, TuningPair};
use crate::simulation::{Dgp, DistParams};
use crate::tuning::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Fit,
    Predict,
    Tune,
    Simulate,
    Loo,
    Diagnose,
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        <Command as clap::ValueEnum>::from_str(s, true)
            .map_err(|_| Error::InvalidParameter(format!("unknown command `{s}`")))
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Fit => "fit",
            Command::Predict => "predict",
            Command::Tune => "tune",
            Command::Simulate => "simulate",
            Command::Loo => "loo",
            Command::Diagnose => "diagnose",
        })
    }
}

/// Optional expansion of the covariates before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovariateTransform {
    #[default]
    None,
    /// Append the square of every covariate column.
    Quadratic,
}

impl FromStr for CovariateTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(CovariateTransform::None),
            "quadratic" => Ok(CovariateTransform::Quadratic),
            other => Err(Error::InvalidParameter(format!(
                "unknown covariate transform `{other}`"
            ))),
        }
    }
}

impl fmt::Display for CovariateTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovariateTransform::None => "none",
            CovariateTransform::Quadratic => "quadratic",
        })
    }
}

/// The five contamination settings `(proportion, shift)` of the matrix tables.
pub fn default_scenarios() -> Vec<(f64, f64)> {
    vec![(0.0, 0.0), (0.1, 50.0), (0.1, 100.0), (0.2, 50.0), (0.2, 100.0)]
}

/// Every recognised key, in echo order.
pub const KEYS: &[&str] = &[
    "command",
    "covariates",
    "responses",
    "kind",
    "points",
    "truth",
    "output",
    "seed",
    "lambda",
    "gamma",
    "epsilon",
    "max-iter",
    "weight-floor-tolerance",
    "grid-lambda-count",
    "grid-exponent",
    "gamma-ratios",
    "include-zero-gamma",
    "covariate-transform",
    "dgp",
    "n",
    "q",
    "p",
    "n-test",
    "replications",
    "scenarios",
    "dist-mu0",
    "dist-beta",
    "dist-v1",
    "dist-sigma0",
    "dist-gamma-sigma",
    "dist-v2",
    "dgp2-beta",
    "contaminate",
    "probes",
    "point",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub covariates: Option<PathBuf>,
    pub responses: Option<PathBuf>,
    pub kind: ResponseKind,
    /// Evaluation points for `predict`.
    pub points: Option<PathBuf>,
    /// True responses at the evaluation points, for the absolute-error output.
    pub truth: Option<PathBuf>,
    pub output: PathBuf,
    pub seed: u64,
    /// Fixed tuning pair; when `lambda` is unset the pair is selected by BIC.
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub fit: FitConfig,
    pub grid: GridSpec,
    pub transform: CovariateTransform,
    pub dgp: Dgp,
    pub n: usize,
    /// Generator defaults when unset.
    pub q: Option<usize>,
    pub p: Option<usize>,
    /// Defaults to `n`.
    pub n_test: Option<usize>,
    pub replications: usize,
    pub scenarios: Vec<(f64, f64)>,
    pub dist: DistParams,
    pub dgp2_beta: Option<Vec<f64>>,
    /// `(proportion, shift)` injected before `loo`; contaminated rows are never held out.
    pub contaminate: Option<(f64, f64)>,
    pub probes: usize,
    /// Evaluation point for `diagnose`; defaults to the covariate mean.
    pub point: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            covariates: None,
            responses: None,
            kind: ResponseKind::Matrix,
            points: None,
            truth: None,
            output: PathBuf::from("rfr-out"),
            seed: 0,
            lambda: None,
            gamma: None,
            fit: FitConfig::default(),
            grid: GridSpec::default(),
            transform: CovariateTransform::None,
            dgp: Dgp::MatrixBeta,
            n: 50,
            q: None,
            p: None,
            n_test: None,
            replications: 100,
            scenarios: default_scenarios(),
            dist: DistParams::default(),
            dgp2_beta: None,
            contaminate: None,
            probes: 100,
            point: None,
        }
    }

    /// Builds a config from `pairs`; `command` must be present.
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let command = pairs
            .get("command")
            .ok_or_else(|| Error::InvalidParameter("missing `command`".into()))?
            .parse()?;
        let mut cfg = RunConfig::new(command);
        for (key, value) in pairs {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let unset = value.is_empty();
        match key {
            "command" => self.command = value.parse()?,
            "covariates" => self.covariates = (!unset).then(|| value.into()),
            "responses" => self.responses = (!unset).then(|| value.into()),
            "kind" => self.kind = value.parse()?,
            "points" => self.points = (!unset).then(|| value.into()),
            "truth" => self.truth = (!unset).then(|| value.into()),
            "output" => self.output = value.into(),
            "seed" => self.seed = num(key, value)?,
            "lambda" => self.lambda = opt(key, value)?,
            "gamma" => self.gamma = opt(key, value)?,
            "epsilon" => self.fit.epsilon = num(key, value)?,
            "max-iter" => self.fit.max_iterations = num(key, value)?,
            "weight-floor-tolerance" => self.fit.weight_floor_tolerance = num(key, value)?,
            "grid-lambda-count" => self.grid.lambda_count = num(key, value)?,
            "grid-exponent" => self.grid.exponent = num(key, value)?,
            "gamma-ratios" => self.grid.gamma_ratios = list(key, value)?,
            "include-zero-gamma" => self.grid.include_zero_gamma = num(key, value)?,
            "covariate-transform" => self.transform = value.parse()?,
            "dgp" => self.dgp = value.parse()?,
            "n" => self.n = num(key, value)?,
            "q" => self.q = opt(key, value)?,
            "p" => self.p = opt(key, value)?,
            "n-test" => self.n_test = opt(key, value)?,
            "replications" => self.replications = num(key, value)?,
            "scenarios" => self.scenarios = value.split(',').map(|s| pair(key, s)).collect::<Result<_>>()?,
            "dist-mu0" => self.dist.mu0 = num(key, value)?,
            "dist-beta" => self.dist.beta = num(key, value)?,
            "dist-v1" => self.dist.v1 = num(key, value)?,
            "dist-sigma0" => self.dist.sigma0 = num(key, value)?,
            "dist-gamma-sigma" => self.dist.gamma_sigma = num(key, value)?,
            "dist-v2" => self.dist.v2 = num(key, value)?,
            "dgp2-beta" => self.dgp2_beta = (!unset).then(|| list(key, value)).transpose()?,
            "contaminate" => self.contaminate = (!unset).then(|| pair(key, value)).transpose()?,
            "probes" => self.probes = num(key, value)?,
            "point" => self.point = (!unset).then(|| list(key, value)).transpose()?,
            other => return Err(Error::InvalidParameter(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.fit.validate()?;
        self.grid.validate()?;
        if self.gamma.is_some() && self.lambda.is_none() {
            return Err(Error::InvalidParameter("`gamma` given without `lambda`".into()));
        }
        self.tuning_pair().transpose()?;
        if self.scenarios.is_empty() {
            return Err(Error::InvalidParameter("no scenarios".into()));
        }
        let needs_data = !matches!(self.command, Command::Simulate);
        if needs_data && (self.covariates.is_none() || self.responses.is_none()) {
            return Err(Error::InvalidParameter(format!(
                "`{}` needs both `covariates` and `responses`",
                self.command
            )));
        }
        if self.command == Command::Predict && self.points.is_none() {
            return Err(Error::InvalidParameter("`predict` needs `points`".into()));
        }
        Ok(())
    }

    /// The fixed pair, if any; `gamma` defaults to 0.
    pub fn tuning_pair(&self) -> Option<Result<TuningPair>> {
        self.lambda.map(|l| TuningPair::new(l, self.gamma.unwrap_or(0.0)))
    }

    /// Every key, one `key = value` line each.
    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let opt_f = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let opt_u = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        for key in KEYS {
            let value = match *key {
                "command" => self.command.to_string(),
                "covariates" => path(&self.covariates),
                "responses" => path(&self.responses),
                "kind" => self.kind.to_string(),
                "points" => path(&self.points),
                "truth" => path(&self.truth),
                "output" => self.output.display().to_string(),
                "seed" => self.seed.to_string(),
                "lambda" => opt_f(self.lambda),
                "gamma" => opt_f(self.gamma),
                "epsilon" => self.fit.epsilon.to_string(),
                "max-iter" => self.fit.max_iterations.to_string(),
                "weight-floor-tolerance" => self.fit.weight_floor_tolerance.to_string(),
                "grid-lambda-count" => self.grid.lambda_count.to_string(),
                "grid-exponent" => self.grid.exponent.to_string(),
                "gamma-ratios" => join(&self.grid.gamma_ratios),
                "include-zero-gamma" => self.grid.include_zero_gamma.to_string(),
                "covariate-transform" => self.transform.to_string(),
                "dgp" => self.dgp.to_string(),
                "n" => self.n.to_string(),
                "q" => opt_u(self.q),
                "p" => opt_u(self.p),
                "n-test" => opt_u(self.n_test),
                "replications" => self.replications.to_string(),
                "scenarios" => self
                    .scenarios
                    .iter()
                    .map(|(a, b)| format!("{a}:{b}"))
                    .collect::<Vec<_>>()
                    .join(","),
                "dist-mu0" => self.dist.mu0.to_string(),
                "dist-beta" => self.dist.beta.to_string(),
                "dist-v1" => self.dist.v1.to_string(),
                "dist-sigma0" => self.dist.sigma0.to_string(),
                "dist-gamma-sigma" => self.dist.gamma_sigma.to_string(),
                "dist-v2" => self.dist.v2.to_string(),
                "dgp2-beta" => self.dgp2_beta.as_deref().map(join).unwrap_or_default(),
                "contaminate" => self.contaminate.map(|(a, b)| format!("{a}:{b}")).unwrap_or_default(),
                "probes" => self.probes.to_string(),
                "point" => self.point.as_deref().map(join).unwrap_or_default(),
                _ => unreachable!("every key is echoed"),
            };
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&value);
            out.push('\n');
        }
        out
    }
}

/// Normalises `snake_case` keys to the dashed flag spelling.
pub fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

/// Parses a `key = value` file into a map; later lines win.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: idx + 1,
                column: 1,
                message: "expected `key = value`".into(),
            });
        };
        let key = normalize_key(key);
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Parse {
                line: idx + 1,
                column: 1,
                message: format!("unknown key `{key}`"),
            });
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("`{key}`: cannot parse `{value}`")))
}

fn opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value.is_empty() {
        Ok(None)
    } else {
        num(key, value).map(Some)
    }
}

fn list(key: &str, value: &str) -> Result<Vec<f64>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| num(key, v.trim())).collect()
}

fn pair(key: &str, value: &str) -> Result<(f64, f64)> {
    let (a, b) = value
        .trim()
        .split_once(':')
        .ok_or_else(|| Error::InvalidParameter(format!("`{key}`: expected `proportion:shift`, got `{value}`")))?;
    Ok((num(key, a.trim())?, num(key, b.trim())?))
}
