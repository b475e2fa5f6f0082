//! Principal component analysis by eigendecomposition of the sample
//! covariance matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PcaError {
    #[error("need at least 2 rows to fit, got {0}")]
    TooFewRows(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cannot keep {requested} components of {dim}-dimensional data")]
    TooManyComponents { requested: usize, dim: usize },
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("eigendecomposition did not converge")]
    NoConvergence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` orthonormal principal directions, by decreasing variance.
    pub components: Vec<Vec<f64>>,
    /// Sample variance (n - 1 denominator) along each component.
    pub explained_variance: Vec<f64>,
}

/// Fits `k` principal components to `rows`.
///
/// Each component's largest-magnitude entry is made positive so fits are
/// reproducible. Rank-deficient data is accepted: the trailing components
/// then span the null space with zero variance, so `k` may exceed the number
/// of rows as long as it does not exceed the dimension.
pub fn fit_pca(rows: &[Vec<f64>], k: usize) -> Result<PcaModel, PcaError> {
    let n = rows.len();
    if n < 2 {
        return Err(PcaError::TooFewRows(n));
    }
    let dim = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(PcaError::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    if k > dim {
        return Err(PcaError::TooManyComponents { requested: k, dim });
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(PcaError::NonFinite);
    }

    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    // Constant columns have zero rows and columns in the covariance, so each
    // is an exact eigenvector with eigenvalue 0. Only the rest is decomposed,
    // which keeps the eigensolver away from large exactly-zero blocks.
    let active: Vec<usize> = (0..dim).filter(|&j| rows.iter().any(|r| r[j] != mean[j])).collect();
    let centered = DMatrix::from_fn(n, active.len(), |i, j| rows[i][active[j]] - mean[active[j]]);
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::try_new(cov, f64::EPSILON, 0).ok_or(PcaError::NoConvergence)?;
    if eig.eigenvalues.iter().chain(eig.eigenvectors.iter()).any(|v| !v.is_finite()) {
        return Err(PcaError::NoConvergence);
    }

    // (variance, eigenvector index in the active block or constant column)
    let mut pairs: Vec<(f64, Result<usize, usize>)> = (0..active.len())
        .map(|i| (eig.eigenvalues[i].max(0.0), Ok(i)))
        .chain((0..dim).filter(|j| active.binary_search(j).is_err()).map(|j| (0.0, Err(j))))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &(variance, which) in pairs.iter().take(k) {
        let mut v = vec![0.0; dim];
        match which {
            Ok(i) => {
                for (a, &j) in active.iter().enumerate() {
                    v[j] = eig.eigenvectors[(a, i)];
                }
            }
            Err(j) => v[j] = 1.0,
        }
        let pivot = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        explained_variance.push(variance);
    }

    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Projects `x` onto the components: `components · (x − mean)`.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>, PcaError> {
        if x.len() != self.dim() {
            return Err(PcaError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(x).zip(&self.mean).map(|((ci, xi), mi)| ci * (xi - mi)).sum())
            .collect())
    }

    /// Maps projected coordinates back into the input space.
    pub fn inverse_transform(&self, z: &[f64]) -> Result<Vec<f64>, PcaError> {
        if z.len() != self.k() {
            return Err(PcaError::DimensionMismatch {
                expected: self.k(),
                found: z.len(),
            });
        }
        let mut x = self.mean.clone();
        for (c, zi) in self.components.iter().zip(z) {
            for (xj, cj) in x.iter_mut().zip(c) {
                *xj += zi * cj;
            }
        }
        Ok(x)
    }

    /// Mean squared reconstruction error over `rows`.
    pub fn reconstruction_error(&self, rows: &[Vec<f64>]) -> Result<f64, PcaError> {
        let mut total = 0.0;
        for r in rows {
            let back = self.inverse_transform(&self.transform(r)?)?;
            total += back.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        Ok(total / (rows.len() * self.dim()).max(1) as f64)
    }
}
