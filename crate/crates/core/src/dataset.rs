use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::metric::{MetricObject, ResponseKind};

/// Eigenvalues below this fraction of the largest are dropped from the
/// covariance pseudo-inverse.
pub const PINV_RELATIVE_CUTOFF: f64 = 1e-10;

/// Paired Euclidean covariates and metric-space responses.
///
/// The covariate mean, the sample covariance (denominator `n - 1`) and its
/// Moore-Penrose pseudo-inverse are computed once at construction.
#[derive(Debug, Clone)]
pub struct Dataset {
    p: usize,
    covariates: Vec<f64>,
    responses: Vec<MetricObject>,
    mean: Vec<f64>,
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
}

impl Dataset {
    pub fn new(covariates: Vec<Vec<f64>>, responses: Vec<MetricObject>) -> Result<Self> {
        let n = covariates.len();
        if n < 2 {
            return Err(Error::Shape(format!("need at least 2 observations, got {n}")));
        }
        if responses.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: responses.len(),
            });
        }
        let p = covariates[0].len();
        if p == 0 {
            return Err(Error::Shape("covariate rows are empty".into()));
        }
        if let Some(row) = covariates.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: row.len(),
            });
        }
        if covariates.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Invariant("non-finite covariate".into()));
        }
        if responses.iter().any(|y| !y.compatible(&responses[0])) {
            return Err(Error::MixedResponses);
        }
        let flat = covariates.concat();
        Ok(Self::from_parts(p, flat, responses))
    }

    fn from_parts(p: usize, covariates: Vec<f64>, responses: Vec<MetricObject>) -> Self {
        let n = responses.len();
        let mut mean = vec![0.0; p];
        for row in covariates.chunks_exact(p) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        let mut covariance = DMatrix::<f64>::zeros(p, p);
        for row in covariates.chunks_exact(p) {
            for j in 0..p {
                let dj = row[j] - mean[j];
                for k in j..p {
                    covariance[(j, k)] += dj * (row[k] - mean[k]);
                }
            }
        }
        for j in 0..p {
            for k in j..p {
                let v = covariance[(j, k)] / (n as f64 - 1.0);
                covariance[(j, k)] = v;
                covariance[(k, j)] = v;
            }
        }
        let precision = pseudo_inverse(&covariance);
        Dataset {
            p,
            covariates,
            responses,
            mean,
            covariance,
            precision,
        }
    }

    pub fn n(&self) -> usize {
        self.responses.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn covariate(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.p..(i + 1) * self.p]
    }

    pub fn covariate_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.covariates.chunks_exact(self.p)
    }

    pub fn responses(&self) -> &[MetricObject] {
        &self.responses
    }

    pub fn kind(&self) -> ResponseKind {
        self.responses[0].kind()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Pseudo-inverse of the covariance.
    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    /// Same covariates (and cached moments) with new responses.
    pub fn with_responses(&self, responses: Vec<MetricObject>) -> Result<Dataset> {
        if responses.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: responses.len(),
            });
        }
        if responses.iter().any(|y| !y.compatible(&responses[0])) {
            return Err(Error::MixedResponses);
        }
        Ok(Dataset {
            responses,
            ..self.clone()
        })
    }

    /// Sub-dataset of the listed observations, moments recomputed.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.len() < 2 {
            return Err(Error::Shape("subset needs at least 2 observations".into()));
        }
        let mut cov = Vec::with_capacity(indices.len() * self.p);
        let mut resp = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n() {
                return Err(Error::InvalidParameter(format!("index {i} out of range")));
            }
            cov.extend_from_slice(self.covariate(i));
            resp.push(self.responses[i].clone());
        }
        Ok(Self::from_parts(self.p, cov, resp))
    }

    /// Every observation except `index`.
    pub fn without(&self, index: usize) -> Result<Dataset> {
        let keep: Vec<usize> = (0..self.n()).filter(|&i| i != index).collect();
        self.subset(&keep)
    }

    /// Appends squared copies of every covariate column.
    pub fn with_quadratic_terms(&self) -> Dataset {
        let rows: Vec<f64> = self
            .covariate_rows()
            .flat_map(|r| r.iter().copied().chain(r.iter().map(|v| v * v)).collect::<Vec<_>>())
            .collect();
        Self::from_parts(2 * self.p, rows, self.responses.clone())
    }
}

/// Moore-Penrose pseudo-inverse of a symmetric positive semidefinite matrix,
/// truncating eigenvalues below `PINV_RELATIVE_CUTOFF * max eigenvalue`.
pub fn pseudo_inverse(sym: &DMatrix<f64>) -> DMatrix<f64> {
    let p = sym.nrows();
    let eig = SymmetricEigen::new(sym.clone());
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let mut out = DMatrix::<f64>::zeros(p, p);
    if max <= 0.0 {
        return out;
    }
    let cutoff = PINV_RELATIVE_CUTOFF * max;
    for (idx, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev <= cutoff {
            continue;
        }
        let v = eig.eigenvectors.column(idx);
        out += (v * v.transpose()) / ev;
    }
    // exact symmetry
    for j in 0..p {
        for k in (j + 1)..p {
            let m = 0.5 * (out[(j, k)] + out[(k, j)]);
            out[(j, k)] = m;
            out[(k, j)] = m;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::SymMatrix;

    fn toy(cov: Vec<Vec<f64>>) -> Dataset {
        let n = cov.len();
        Dataset::new(cov, vec![MetricObject::Matrix(SymMatrix::identity(2)); n]).unwrap()
    }

    #[test]
    fn moments_univariate() {
        let d = toy(vec![vec![0.0], vec![1.0]]);
        assert_eq!(d.mean(), &[0.5]);
        assert!((d.covariance()[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((d.precision()[(0, 0)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_covariates_use_pseudo_inverse() {
        let d = toy(vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]);
        let s = d.covariance();
        let pinv = d.precision();
        // S P S = S
        let sps = s * pinv * s;
        assert!((sps - s).abs().max() < 1e-8);
    }

    #[test]
    fn constant_covariate_gives_zero_precision() {
        let d = toy(vec![vec![1.0], vec![1.0], vec![1.0]]);
        assert_eq!(d.precision()[(0, 0)], 0.0);
    }

    #[test]
    fn rejects_bad_shapes() {
        let one = vec![MetricObject::Matrix(SymMatrix::identity(2))];
        assert!(Dataset::new(vec![vec![0.0]], one).is_err());
        let two = vec![MetricObject::Matrix(SymMatrix::identity(2)); 2];
        assert!(Dataset::new(vec![vec![0.0], vec![1.0, 2.0]], two.clone()).is_err());
        let mixed = vec![
            MetricObject::Matrix(SymMatrix::identity(2)),
            MetricObject::Matrix(SymMatrix::identity(3)),
        ];
        assert_eq!(
            Dataset::new(vec![vec![0.0], vec![1.0]], mixed).unwrap_err(),
            Error::MixedResponses
        );
    }

    #[test]
    fn quadratic_terms_appended() {
        let d = toy(vec![vec![2.0], vec![3.0]]).with_quadratic_terms();
        assert_eq!(d.p(), 2);
        assert_eq!(d.covariate(1), &[3.0, 9.0]);
    }
}
