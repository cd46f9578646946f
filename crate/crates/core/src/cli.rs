//! The `rfr` command-line front end.
//!
//! ```text
//! rfr <fit|predict|tune|simulate|loo|diagnose> [--config FILE] [--key value ...]
//! ```
//!
//! Every configuration key is also a long flag; flags win over the file.
//! Artifacts go to `--output` (default `rfr-out/`) together with the echoed
//! `config.txt`. Failures print `{"error": {"code", "message"}}` to stderr,
//! write it to `error.json` when possible, and exit with status 2.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{normalize_key, parse_config_text, Command, CovariateTransform, RunConfig, KEYS};
use crate::dataset::Dataset;
use crate::diagnostics::{contraction_trace, estimate_regularity};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, load_covariates, load_dataset, load_responses};
use crate::metric::MetricObject;
use crate::regression::{fit_robust, FitResult, TuningPair};
use crate::simulation::{
    contaminate, leave_one_out, replicate_rng, run_scenario, DgpParams, HoldoutPolicy, ScenarioSpec,
};
use crate::tuning::{grid_from_lambda_max, lambda_max, max_outliers, select_from_grid, BicRecord};

fn key_help(key: &str) -> &'static str {
    match key {
        "covariates" => "covariate CSV (one row per observation, optional header)",
        "responses" => "response CSV (matrix rows of q^2 values, or grid row then quantile rows)",
        "kind" => "response kind: matrix | distribution",
        "points" => "evaluation points CSV for predict",
        "truth" => "true responses at the evaluation points; enables abs_error.csv",
        "output" => "output directory",
        "seed" => "random seed",
        "lambda" => "fixed lambda; omit to select by BIC",
        "gamma" => "fixed gamma (default 0 when lambda is given)",
        "epsilon" => "convergence tolerance",
        "max-iter" => "iteration cap of the alternating fit",
        "weight-floor-tolerance" => "a weight below 1 - tol counts as an outlier",
        "grid-lambda-count" => "number of lambda candidates",
        "grid-exponent" => "exponent of the lambda grid map",
        "gamma-ratios" => "comma-separated gamma/lambda ratios",
        "include-zero-gamma" => "always include gamma = 0 (true | false)",
        "covariate-transform" => "none | quadratic",
        "dgp" => "generator: matrix_beta | matrix_lognormal | distribution_normal",
        "n" => "training sample size",
        "q" => "matrix dimension",
        "p" => "covariate dimension",
        "n-test" => "test points per replicate (default n)",
        "replications" => "Monte Carlo replications per scenario",
        "scenarios" => "comma-separated proportion:shift contamination settings",
        "dist-mu0" | "dist-beta" | "dist-v1" | "dist-sigma0" | "dist-gamma-sigma" | "dist-v2" => {
            "distribution generator parameter"
        }
        "dgp2-beta" => "comma-separated coefficients of the log-normal generator",
        "contaminate" => "proportion:shift injected before loo",
        "probes" => "random probes per regularity constant",
        "point" => "comma-separated evaluation point for diagnose",
        _ => "",
    }
}

fn command_line() -> clap::Command {
    let mut cmd = clap::Command::new("rfr")
        .about("Robust global Frechet regression for matrix and distribution responses")
        .version(env!("CARGO_PKG_VERSION"))
        .arg(
            clap::Arg::new("command")
                .required(true)
                .value_parser(clap::builder::EnumValueParser::<Command>::new()),
        )
        .arg(
            clap::Arg::new("config")
                .long("config")
                .help("key = value configuration file"),
        );
    for key in KEYS.iter().filter(|k| **k != "command") {
        cmd = cmd.arg(clap::Arg::new(*key).long(*key).help(key_help(key)));
    }
    cmd
}

/// Merges the config file (if any) with flag overrides.
pub fn config_from_args<I, T>(args: I) -> std::result::Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = command_line().try_get_matches_from(args).map_err(CliError::Usage)?;
    let mut pairs: BTreeMap<String, String> = match matches.get_one::<String>("config") {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Run(Error::Io(format!("{path}: {e}"))))?;
            parse_config_text(&text).map_err(CliError::Run)?
        }
        None => BTreeMap::new(),
    };
    let command = matches.get_one::<Command>("command").expect("required");
    pairs.insert("command".into(), command.to_string());
    for key in KEYS.iter().filter(|k| **k != "command") {
        if let Some(v) = matches.get_one::<String>(key) {
            pairs.insert(normalize_key(key), v.clone());
        }
    }
    RunConfig::from_pairs(&pairs).map_err(CliError::Run)
}

#[derive(Debug)]
pub enum CliError {
    Usage(clap::Error),
    Run(Error),
}

/// Machine-readable failure record.
pub fn error_record(code: &str, message: &str) -> String {
    serde_json::to_string(&json!({ "error": { "code": code, "message": message } })).expect("serializable")
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match config_from_args(args) {
        Ok(cfg) => cfg,
        Err(CliError::Usage(e)) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("{}", error_record("usage_error", &e.to_string()));
            return 2;
        }
        Err(CliError::Run(e)) => {
            eprintln!("{}", error_record(e.code(), &e.to_string()));
            return 2;
        }
    };
    match execute(&cfg) {
        Ok(()) => 0,
        Err(e) => {
            let record = error_record(e.code(), &e.to_string());
            eprintln!("{record}");
            if cfg.output.is_dir() {
                let _ = fs::write(cfg.output.join("error.json"), format!("{record}\n"));
            }
            2
        }
    }
}

/// Runs one command and writes its artifacts.
pub fn execute(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output)?;
    fs::write(cfg.output.join("config.txt"), cfg.to_text())?;
    match cfg.command {
        Command::Fit => run_fit(cfg),
        Command::Predict => run_predict(cfg),
        Command::Tune => {
            let data = load(cfg)?;
            tune(cfg, &data).map(|_| ())
        }
        Command::Simulate => run_simulate(cfg),
        Command::Loo => run_loo(cfg),
        Command::Diagnose => run_diagnose(cfg),
    }
}

fn load(cfg: &RunConfig) -> Result<Dataset> {
    let (Some(x), Some(y)) = (&cfg.covariates, &cfg.responses) else {
        return Err(Error::InvalidParameter("covariates and responses are required".into()));
    };
    let data = load_dataset(x, y, cfg.kind)?;
    Ok(match cfg.transform {
        CovariateTransform::None => data,
        CovariateTransform::Quadratic => data.with_quadratic_terms(),
    })
}

fn transform_point(cfg: &RunConfig, x: &[f64]) -> Vec<f64> {
    match cfg.transform {
        CovariateTransform::None => x.to_vec(),
        CovariateTransform::Quadratic => x.iter().copied().chain(x.iter().map(|v| v * v)).collect(),
    }
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn pair_json(t: TuningPair) -> Value {
    json!({ "lambda": t.lambda, "gamma": t.gamma })
}

/// BIC selection over the default grid recipe; writes `bic_trace.csv` and
/// `selected.json`.
fn tune(cfg: &RunConfig, data: &Dataset) -> Result<TuningPair> {
    let lmax = lambda_max(data, &cfg.fit)?;
    let grid = grid_from_lambda_max(lmax, &cfg.grid)?;
    let (pair, trace) = select_from_grid(data, &grid, &cfg.fit)?;
    let mut csv = String::from("lambda,gamma,bic,k_hat,mean_weighted_residual,feasible\n");
    for r in &trace {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(r.pair.lambda),
            fmt_f64(r.pair.gamma),
            fmt_f64(r.bic),
            r.k_hat,
            fmt_f64(r.mean_weighted_residual),
            r.feasible
        ));
    }
    fs::write(cfg.output.join("bic_trace.csv"), csv)?;
    let best: &BicRecord = trace
        .iter()
        .find(|r| r.pair == pair)
        .expect("selected pair is in the trace");
    write_json(
        &cfg.output.join("selected.json"),
        &json!({
            "lambda": pair.lambda,
            "gamma": pair.gamma,
            "bic": best.bic,
            "k_hat": best.k_hat,
            "lambda_max": lmax,
            "n": data.n(),
            "max_outliers": max_outliers(data.n()),
            "candidates": trace.len(),
        }),
    )?;
    Ok(pair)
}

fn resolve_pair(cfg: &RunConfig, data: &Dataset) -> Result<(TuningPair, bool)> {
    match cfg.tuning_pair() {
        Some(pair) => Ok((pair?, false)),
        None => Ok((tune(cfg, data)?, true)),
    }
}

pub fn object_json(o: &MetricObject) -> Value {
    match o {
        MetricObject::Matrix(m) => json!({ "kind": "matrix", "dim": m.dim(), "entries": m.entries() }),
        MetricObject::Quantile(f) => json!({
            "kind": "distribution",
            "levels": f.grid().levels(),
            "values": f.values(),
        }),
    }
}

fn fit_json(index: usize, fit: &FitResult, tol: f64) -> Value {
    json!({
        "index": index,
        "point": fit.evaluation_point,
        "estimate": object_json(&fit.estimate),
        "weights": fit.weights,
        "leverages": fit.leverages,
        "weighted_sq_distances": fit.weighted_sq_distances,
        "outliers": fit.outlier_count(tol),
        "iterations": fit.iterations,
        "converged": fit.converged,
    })
}

fn fits_json(pair: TuningPair, tuned: bool, points: &[Vec<f64>], fits: &[Result<FitResult>], tol: f64) -> Value {
    let records: Vec<Value> = fits
        .iter()
        .enumerate()
        .map(|(i, f)| match f {
            Ok(f) => fit_json(i, f, tol),
            Err(e) => json!({
                "index": i,
                "point": points[i],
                "error": { "code": e.code(), "message": e.to_string() },
            }),
        })
        .collect();
    json!({ "pair": pair_json(pair), "tuned": tuned, "records": records })
}

/// Robust fits at each point. A degenerate denominator at one point is
/// recorded on that point; any other error aborts.
fn fit_points(
    data: &Dataset,
    pair: TuningPair,
    cfg: &RunConfig,
    points: &[Vec<f64>],
) -> Result<Vec<Result<FitResult>>> {
    let fits: Vec<Result<FitResult>> = points.par_iter().map(|x| fit_robust(data, x, pair, &cfg.fit)).collect();
    for f in &fits {
        match f {
            Err(Error::NearSingularDenominator { .. }) | Ok(_) => {}
            Err(e) => return Err(e.clone()),
        }
    }
    Ok(fits)
}

fn run_fit(cfg: &RunConfig) -> Result<()> {
    let data = load(cfg)?;
    let (pair, tuned) = resolve_pair(cfg, &data)?;
    let points: Vec<Vec<f64>> = data.covariate_rows().map(|r| r.to_vec()).collect();
    let fits = fit_points(&data, pair, cfg, &points)?;
    write_json(
        &cfg.output.join("fits.json"),
        &fits_json(pair, tuned, &points, &fits, cfg.fit.weight_floor_tolerance),
    )
}

fn run_predict(cfg: &RunConfig) -> Result<()> {
    let data = load(cfg)?;
    let raw = load_covariates(cfg.points.as_deref().expect("validated"))?;
    let points: Vec<Vec<f64>> = raw.iter().map(|x| transform_point(cfg, x)).collect();
    let (pair, tuned) = resolve_pair(cfg, &data)?;
    let fits = fit_points(&data, pair, cfg, &points)?;
    write_json(
        &cfg.output.join("predictions.json"),
        &fits_json(pair, tuned, &points, &fits, cfg.fit.weight_floor_tolerance),
    )?;
    if let Some(truth_path) = &cfg.truth {
        let truth = load_responses(truth_path, cfg.kind)?;
        if truth.len() != fits.len() {
            return Err(Error::Shape(format!(
                "{} truth rows for {} evaluation points",
                truth.len(),
                fits.len()
            )));
        }
        let width = truth[0].values().len();
        let mut csv = String::from("index");
        for c in 0..width {
            csv.push_str(&format!(",e{c}"));
        }
        csv.push('\n');
        for (i, (fit, t)) in fits.iter().zip(&truth).enumerate() {
            let Ok(fit) = fit else {
                csv.push_str(&i.to_string());
                csv.push_str(&",NaN".repeat(width));
                csv.push('\n');
                continue;
            };
            if !fit.estimate.compatible(t) {
                return Err(Error::DimensionMismatch {
                    expected: fit.estimate.values().len(),
                    found: t.values().len(),
                });
            }
            csv.push_str(&i.to_string());
            for (a, b) in fit.estimate.values().iter().zip(t.values()) {
                csv.push(',');
                csv.push_str(&fmt_f64((a - b).abs()));
            }
            csv.push('\n');
        }
        fs::write(cfg.output.join("abs_error.csv"), csv)?;
    }
    Ok(())
}

fn run_simulate(cfg: &RunConfig) -> Result<()> {
    let mut csv = String::from(
        "proportion,shift,replicate,status,error_standard,error_robust,lambda,gamma,k_hat,lambda_max,contaminated,contaminated_zero_weight,unconverged_fits\n",
    );
    let mut cells = Vec::new();
    let mut first: Option<ScenarioSpec> = None;
    for &(proportion, shift) in &cfg.scenarios {
        let mut spec = ScenarioSpec::new(cfg.dgp, cfg.n).with_contamination(proportion, shift);
        if let Some(q) = cfg.q {
            spec.q = q;
        }
        if let Some(p) = cfg.p {
            spec.p = p;
        }
        spec.n_test = cfg.n_test.unwrap_or(cfg.n);
        spec.replications = cfg.replications;
        spec.seed = cfg.seed;
        spec.dgp_params = DgpParams {
            dist: cfg.dist,
            dgp2_beta: cfg.dgp2_beta.clone(),
        };
        spec.grid = cfg.grid.clone();
        spec.fit = cfg.fit;
        let report = run_scenario(&spec)?;
        for r in &report.replicates {
            csv.push_str(&format!(
                "{},{},{},ok,{},{},{},{},{},{},{},{},{}\n",
                fmt_f64(proportion),
                fmt_f64(shift),
                r.replicate,
                fmt_f64(r.error_standard),
                fmt_f64(r.error_robust),
                fmt_f64(r.selected.lambda),
                fmt_f64(r.selected.gamma),
                r.k_hat,
                fmt_f64(r.lambda_max),
                r.contaminated,
                r.contaminated_zero_weight,
                r.unconverged_fits
            ));
        }
        for (r, code) in &report.failures {
            csv.push_str(&format!(
                "{},{},{r},{code},NaN,NaN,NaN,NaN,,NaN,,,\n",
                fmt_f64(proportion),
                fmt_f64(shift)
            ));
        }
        let a = &report.aggregate;
        cells.push(json!({
            "proportion": proportion,
            "shift": shift,
            "standard": a.standard,
            "robust": a.robust,
            "lambda": a.lambda,
            "gamma": a.gamma,
            "k_hat": a.k_hat,
            "failed": a.failed,
        }));
        first.get_or_insert(spec);
    }
    let spec = first.expect("at least one scenario");
    fs::write(cfg.output.join("replicates.csv"), csv)?;
    write_json(
        &cfg.output.join("aggregate.json"),
        &json!({
            "dgp": spec.dgp.to_string(),
            "error": if spec.dgp == crate::simulation::Dgp::DistributionNormal { "mise" } else { "mse" },
            "n": spec.n,
            "q": spec.q,
            "p": spec.p,
            "n_test": spec.n_test,
            "replications": spec.replications,
            "seed": spec.seed,
            "cells": cells,
        }),
    )
}

fn run_loo(cfg: &RunConfig) -> Result<()> {
    let clean = load(cfg)?;
    let (data, contaminated) = match cfg.contaminate {
        Some((proportion, shift)) => contaminate(&clean, proportion, shift, &mut replicate_rng(cfg.seed, 0))?,
        None => (clean, Vec::new()),
    };
    let policy = HoldoutPolicy::Exclude(contaminated.clone());
    let report = leave_one_out(&data, &cfg.grid, &cfg.fit, &policy)?;
    let mut csv = String::from("index,error_standard,error_robust,lambda,gamma,fallback\n");
    for p in &report.points {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.index,
            fmt_f64(p.error_standard),
            fmt_f64(p.error_robust),
            fmt_f64(p.pair.lambda),
            fmt_f64(p.pair.gamma),
            p.fallback
        ));
    }
    fs::write(cfg.output.join("loo_points.csv"), csv)?;
    write_json(
        &cfg.output.join("loo_summary.json"),
        &json!({
            "n": data.n(),
            "held_out": report.points.len(),
            "contaminated": contaminated,
            "standard": report.standard,
            "robust": report.robust,
            "fallbacks": report.fallbacks,
            "failures": report.failures.iter().map(|(i, code)| json!({"index": i, "code": code})).collect::<Vec<_>>(),
        }),
    )
}

fn run_diagnose(cfg: &RunConfig) -> Result<()> {
    let data = load(cfg)?;
    let (pair, tuned) = resolve_pair(cfg, &data)?;
    let x = match &cfg.point {
        Some(raw) => transform_point(cfg, raw),
        None => data.mean().to_vec(),
    };
    if x.len() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            found: x.len(),
        });
    }
    let mut rng = replicate_rng(cfg.seed, 0);
    let report = estimate_regularity(&data, &x, pair, &cfg.fit, cfg.probes, &mut rng)?;
    let fit = fit_robust(&data, &x, pair, &cfg.fit)?;
    let trace = contraction_trace(&fit).ok();
    write_json(
        &cfg.output.join("regularity.json"),
        &json!({
            "pair": pair_json(pair),
            "tuned": tuned,
            "point": x,
            "report": report,
            "contraction": trace,
        }),
    )
}
