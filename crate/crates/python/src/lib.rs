//! Python bindings. Matrices cross the boundary as nested lists, quantile
//! functions as flat lists of values on the dataset's grid.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use robust_frechet::metric::{frobenius_distance, wasserstein_distance};
use robust_frechet::simulation::{gen_dgp1, gen_dist_dgp, replicate_rng, run_scenario, Dgp, DistParams, ScenarioSpec};
use robust_frechet::tuning::{lambda_max as core_lambda_max, select_tuning};
use robust_frechet::{
    fit_robust as core_fit_robust, fit_standard as core_fit_standard, Dataset, FitConfig, FitResult, GridSpec,
    MetricObject, QuantileFunction, QuantileGrid, ResponseKind, SymMatrix,
};

create_exception!(
    rfrechet,
    RfrError,
    PyException,
    "Error raised by the regression library; `code` names the kind."
);

fn err(e: robust_frechet::Error) -> PyErr {
    let exc = RfrError::new_err(e.to_string());
    Python::attach(|py| {
        let _ = exc.value(py).setattr("code", e.code());
    });
    exc
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<SymMatrix> {
    SymMatrix::from_rows(rows).map_err(err)
}

fn rows(m: &SymMatrix) -> Vec<Vec<f64>> {
    m.entries().chunks(m.dim()).map(|r| r.to_vec()).collect()
}

fn object_to_py(py: Python<'_>, o: &MetricObject) -> PyResult<Py<PyAny>> {
    Ok(match o {
        MetricObject::Matrix(m) => rows(m).into_pyobject(py)?.into_any().unbind(),
        MetricObject::Quantile(q) => q.values().to_vec().into_pyobject(py)?.into_any().unbind(),
    })
}

fn config(epsilon: f64, max_iter: usize) -> PyResult<FitConfig> {
    let cfg = FitConfig {
        epsilon,
        max_iterations: max_iter,
        ..FitConfig::default()
    };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

/// Covariates paired with matrix or quantile-function responses.
#[pyclass(name = "Dataset", frozen)]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    /// Symmetric matrix responses given as nested lists.
    #[staticmethod]
    fn from_matrices(covariates: Vec<Vec<f64>>, matrices: Vec<Vec<Vec<f64>>>) -> PyResult<Self> {
        let ys = matrices
            .iter()
            .map(|m| matrix(m).map(MetricObject::Matrix))
            .collect::<PyResult<_>>()?;
        Ok(PyDataset {
            inner: Dataset::new(covariates, ys).map_err(err)?,
        })
    }

    /// Quantile functions sharing the probability levels `levels`.
    #[staticmethod]
    fn from_quantiles(covariates: Vec<Vec<f64>>, levels: Vec<f64>, values: Vec<Vec<f64>>) -> PyResult<Self> {
        let grid = QuantileGrid::new(levels).map_err(err)?;
        let ys = values
            .into_iter()
            .map(|v| {
                QuantileFunction::new(grid.clone(), v)
                    .map(MetricObject::Quantile)
                    .map_err(err)
            })
            .collect::<PyResult<_>>()?;
        Ok(PyDataset {
            inner: Dataset::new(covariates, ys).map_err(err)?,
        })
    }

    /// Reads covariate and response CSV files; `kind` is "matrix" or "distribution".
    #[staticmethod]
    fn load(covariates: &str, responses: &str, kind: &str) -> PyResult<Self> {
        let kind: ResponseKind = kind.parse().map_err(err)?;
        Ok(PyDataset {
            inner: robust_frechet::io::load_dataset(covariates.as_ref(), responses.as_ref(), kind).map_err(err)?,
        })
    }

    /// Sample from the beta matrix generator.
    #[staticmethod]
    #[pyo3(signature = (n, q, seed=0))]
    fn beta_matrices(n: usize, q: usize, seed: u64) -> PyResult<Self> {
        let (inner, _) = gen_dgp1(n, q, &mut replicate_rng(seed, 0)).map_err(err)?;
        Ok(PyDataset { inner })
    }

    /// Sample from the normal distribution generator with default parameters.
    #[staticmethod]
    #[pyo3(signature = (n, seed=0))]
    fn normal_distributions(n: usize, seed: u64) -> PyResult<Self> {
        let (inner, _) = gen_dist_dgp(n, &DistParams::default(), &mut replicate_rng(seed, 0)).map_err(err)?;
        Ok(PyDataset { inner })
    }

    /// Copy with a fraction of responses shifted by `shift`, plus the shifted indices.
    #[pyo3(signature = (proportion, shift, seed=0))]
    fn contaminate(&self, proportion: f64, shift: f64, seed: u64) -> PyResult<(Self, Vec<usize>)> {
        let (inner, idx) =
            robust_frechet::simulation::contaminate(&self.inner, proportion, shift, &mut replicate_rng(seed, 1))
                .map_err(err)?;
        Ok((PyDataset { inner }, idx))
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn kind(&self) -> String {
        self.inner.kind().to_string()
    }

    fn covariates(&self) -> Vec<Vec<f64>> {
        self.inner.covariate_rows().map(|r| r.to_vec()).collect()
    }

    fn responses(&self, py: Python<'_>) -> PyResult<Vec<Py<PyAny>>> {
        self.inner.responses().iter().map(|o| object_to_py(py, o)).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, p={}, kind={})",
            self.inner.n(),
            self.inner.p(),
            self.inner.kind()
        )
    }
}

/// Fit at one evaluation point.
#[pyclass(name = "Fit", frozen)]
struct PyFit {
    inner: FitResult,
}

#[pymethods]
impl PyFit {
    #[getter]
    fn estimate(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        object_to_py(py, &self.inner.estimate)
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.clone()
    }

    #[getter]
    fn leverages(&self) -> Vec<f64> {
        self.inner.leverages.clone()
    }

    #[getter]
    fn weighted_sq_distances(&self) -> Vec<f64> {
        self.inner.weighted_sq_distances.clone()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[pyo3(signature = (tol=1e-10))]
    fn outliers(&self, tol: f64) -> Vec<usize> {
        (0..self.inner.weights.len())
            .filter(|&i| self.inner.weights[i] < 1.0 - tol)
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Fit(iterations={}, converged={}, outliers={})",
            self.inner.iterations,
            self.inner.converged,
            self.inner.outlier_count(1e-10)
        )
    }
}

#[pyfunction]
fn fit_standard(data: &PyDataset, x: Vec<f64>) -> PyResult<PyFit> {
    Ok(PyFit {
        inner: core_fit_standard(&data.inner, &x).map_err(err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (data, x, lam, gamma=0.0, epsilon=1e-6, max_iter=100))]
fn fit_robust(data: &PyDataset, x: Vec<f64>, lam: f64, gamma: f64, epsilon: f64, max_iter: usize) -> PyResult<PyFit> {
    let t = robust_frechet::TuningPair::new(lam, gamma).map_err(err)?;
    Ok(PyFit {
        inner: core_fit_robust(&data.inner, &x, t, &config(epsilon, max_iter)?).map_err(err)?,
    })
}

#[pyfunction]
fn lambda_max(data: &PyDataset) -> PyResult<f64> {
    core_lambda_max(&data.inner, &FitConfig::default()).map_err(err)
}

/// BIC tuning over the default grid. Returns `(lam, gamma, trace)` where
/// `trace` holds one dict per candidate.
#[pyfunction]
fn tune(py: Python<'_>, data: &PyDataset) -> PyResult<(f64, f64, Vec<Py<PyDict>>)> {
    let (pair, records) = py
        .detach(|| select_tuning(&data.inner, &GridSpec::default(), &FitConfig::default()))
        .map_err(err)?;
    let trace = records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("lam", r.pair.lambda)?;
            d.set_item("gamma", r.pair.gamma)?;
            d.set_item("bic", r.bic)?;
            d.set_item("k_hat", r.k_hat)?;
            d.set_item("feasible", r.feasible)?;
            Ok(d.unbind())
        })
        .collect::<PyResult<_>>()?;
    Ok((pair.lambda, pair.gamma, trace))
}

#[pyfunction]
fn frobenius(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<f64> {
    frobenius_distance(&matrix(&a)?, &matrix(&b)?).map_err(err)
}

#[pyfunction]
fn wasserstein(levels: Vec<f64>, a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    let grid = QuantileGrid::new(levels).map_err(err)?;
    let fa = QuantileFunction::new(grid.clone(), a).map_err(err)?;
    let fb = QuantileFunction::new(grid, b).map_err(err)?;
    wasserstein_distance(&fa, &fb).map_err(err)
}

/// Monte Carlo comparison of the standard and robust fits. Returns the
/// aggregate as a dict with keys standard, robust, lam, gamma, k_hat (means)
/// and failed.
#[pyfunction]
#[pyo3(signature = (dgp="matrix_beta", n=50, proportion=0.0, shift=0.0, replications=20, seed=0))]
fn simulate(
    py: Python<'_>,
    dgp: &str,
    n: usize,
    proportion: f64,
    shift: f64,
    replications: usize,
    seed: u64,
) -> PyResult<Py<PyDict>> {
    let dgp: Dgp = dgp.parse().map_err(err)?;
    let mut spec = ScenarioSpec::new(dgp, n).with_contamination(proportion, shift);
    spec.replications = replications;
    spec.seed = seed;
    let a = py.detach(|| run_scenario(&spec)).map_err(err)?.aggregate;
    let d = PyDict::new(py);
    d.set_item("standard", a.standard.mean)?;
    d.set_item("robust", a.robust.mean)?;
    d.set_item("lam", a.lambda.mean)?;
    d.set_item("gamma", a.gamma.mean)?;
    d.set_item("k_hat", a.k_hat.mean)?;
    d.set_item("failed", a.failed)?;
    Ok(d.unbind())
}

#[pymodule]
fn rfrechet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("RfrError", m.py().get_type::<RfrError>())?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyFit>()?;
    m.add_function(wrap_pyfunction!(fit_standard, m)?)?;
    m.add_function(wrap_pyfunction!(fit_robust, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_max, m)?)?;
    m.add_function(wrap_pyfunction!(tune, m)?)?;
    m.add_function(wrap_pyfunction!(frobenius, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
