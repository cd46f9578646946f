//! Robust global Fréchet regression for responses in metric spaces.
//!
//! Responses are symmetric matrices (Frobenius metric) or one-dimensional
//! distributions represented by quantile functions on a fixed grid
//! (L2-Wasserstein metric). Observations are downweighted through an
//! elastic-net regularized weight per observation, tuned by BIC.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod isotonic;
pub mod metric;
pub mod regression;
pub mod simulation;
pub mod tuning;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use metric::{MetricObject, QuantileFunction, QuantileGrid, ResponseKind, SymMatrix};
pub use regression::{fit_robust, fit_standard, FitConfig, FitResult, TuningPair};
pub use tuning::{select_tuning, BicRecord, GridSpec};
