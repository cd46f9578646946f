//! Empirical checks of the regularity constants behind linear convergence of
//! the alternating fit.
//!
//! Every constant is estimated by random probing, so each reported value is a
//! lower bound of the corresponding supremum.

use rand::Rng;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metric::{weighted_mean, MetricObject};
use crate::regression::{
    adaptive_weights, fit_robust, leverage, weighted_sq_distances, FitConfig, FitResult, TuningPair,
};

pub const ESTIMATE_LABEL: &str = "empirical lower bounds";

/// Probed constants at one evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub label: &'static str,
    /// Largest response-to-response, response-to-probe or response-to-iterate distance.
    pub d_u_hat: f64,
    /// Largest absolute leverage at the evaluation point.
    pub d_g_hat: f64,
    /// Smallest mean weight over the weight vectors visited by the fit.
    pub xi_hat: f64,
    /// Largest `|d^2(Y, u1) - d^2(Y, u2)| / d(u1, u2)`.
    pub l_d_hat: f64,
    /// Largest `d(Phi(w1), Phi(w2)) / ||w1 - w2||`.
    pub c_u_hat: f64,
    /// `sqrt(n) C_u L_d D_g / (2 gamma)`.
    pub rho_hat: f64,
    /// Largest contraction ratio along the actual fit.
    pub rho_empirical: f64,
    pub iterations: usize,
    pub converged: bool,
    pub probes: usize,
}

/// `sqrt(n) c_u l_d d_g / (2 gamma)`; zero when the numerator vanishes and
/// infinite when only `gamma` does.
pub fn compose_rho(n: usize, c_u: f64, l_d: f64, d_g: f64, gamma: f64) -> f64 {
    let num = (n as f64).sqrt() * c_u * l_d * d_g;
    if num == 0.0 {
        0.0
    } else {
        num / (2.0 * gamma)
    }
}

fn random_convex_combination<R: Rng + ?Sized>(data: &Dataset, rng: &mut R) -> Result<MetricObject> {
    let coeffs: Vec<f64> = (0..data.n()).map(|_| rng.random::<f64>() + 1e-3).collect();
    weighted_mean(data.responses(), &coeffs)
}

pub fn estimate_regularity<R: Rng + ?Sized>(
    data: &Dataset,
    x: &[f64],
    t: TuningPair,
    cfg: &FitConfig,
    probes: usize,
    rng: &mut R,
) -> Result<RegularityReport> {
    if probes < 10 {
        return Err(Error::InvalidParameter(format!(
            "need at least 10 probes, got {probes}"
        )));
    }
    let n = data.n();
    let g = leverage(data, x)?;
    let d_g_hat = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let fit = fit_robust(data, x, t, cfg)?;
    let ys = data.responses();

    let mut d_u_hat = 0.0f64;
    for (i, a) in ys.iter().enumerate() {
        for b in &ys[i + 1..] {
            d_u_hat = d_u_hat.max(a.distance(b)?);
        }
        for u in &fit.iterates {
            d_u_hat = d_u_hat.max(a.distance(u)?);
        }
    }

    let mut l_d_hat = 0.0f64;
    for _ in 0..probes {
        let u1 = random_convex_combination(data, rng)?;
        let u2 = random_convex_combination(data, rng)?;
        let gap = u1.distance(&u2)?;
        for y in ys {
            let d1 = y.sq_distance(&u1)?;
            let d2 = y.sq_distance(&u2)?;
            d_u_hat = d_u_hat.max(d1.sqrt()).max(d2.sqrt());
            if gap > 0.0 {
                l_d_hat = l_d_hat.max((d1 - d2).abs() / gap);
            }
        }
    }

    let mut c_u_hat = 0.0f64;
    for _ in 0..probes {
        let w1: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let w2: Vec<f64> = w1
            .iter()
            .map(|w| (w + 0.2 * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0))
            .collect();
        let norm = w1.iter().zip(&w2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let c1: Vec<f64> = w1.iter().zip(&g).map(|(w, gi)| w * gi).collect();
        let c2: Vec<f64> = w2.iter().zip(&g).map(|(w, gi)| w * gi).collect();
        let (Ok(p1), Ok(p2)) = (weighted_mean(ys, &c1), weighted_mean(ys, &c2)) else {
            continue;
        };
        c_u_hat = c_u_hat.max(p1.distance(&p2)? / norm);
    }

    let mut xi_hat = 1.0f64;
    for u in &fit.iterates {
        let w = adaptive_weights(&weighted_sq_distances(data, &g, u)?, t);
        xi_hat = xi_hat.min(w.iter().sum::<f64>() / n as f64);
    }

    let rho_empirical = match contraction_trace(&fit) {
        Ok(trace) => trace.max_ratio,
        Err(_) => 0.0,
    };

    Ok(RegularityReport {
        label: ESTIMATE_LABEL,
        d_u_hat,
        d_g_hat,
        xi_hat,
        l_d_hat,
        c_u_hat,
        rho_hat: compose_rho(n, c_u_hat, l_d_hat, d_g_hat, t.gamma),
        rho_empirical,
        iterations: fit.iterations,
        converged: fit.converged,
        probes,
    })
}

/// Per-step contraction ratios of a fit towards its final iterate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionTrace {
    /// `d(u^(s+1), u*) / d(u^(s), u*)` with `u*` the final iterate; steps
    /// where `u^(s)` already equals `u*`, and the final trivial step, are omitted.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// All ratios below one, so the iterates sit under a geometric envelope
    /// with rate `max_ratio`.
    pub geometric: bool,
}

pub fn contraction_trace(fit: &FitResult) -> Result<ContractionTrace> {
    let iterates = &fit.iterates;
    if iterates.len() < 2 {
        return Err(Error::InsufficientIterations(iterates.len()));
    }
    let last = iterates.last().expect("non-empty");
    let dist: Vec<f64> = iterates.iter().map(|u| u.distance(last)).collect::<Result<_>>()?;
    let stop = dist.len() - 2;
    let ratios: Vec<f64> = (0..stop)
        .filter(|&s| dist[s] > 0.0)
        .map(|s| dist[s + 1] / dist[s])
        .collect();
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(ContractionTrace {
        geometric: ratios.iter().all(|&r| r < 1.0),
        max_ratio,
        ratios,
    })
}
