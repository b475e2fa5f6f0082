//! Classifiers trained on assembled feature matrices.

pub mod ensemble;
pub mod gbt;
pub mod logistic;
pub mod mlp;

use thiserror::Error;

pub use ensemble::{majority_vote, train_ensemble, EnsembleModel, EnsembleParams};
pub use gbt::{train_gbt, GbtModel, GbtParams, Node, Tree};
pub use logistic::{train_logistic, LogisticModel, LogisticParams};
pub use mlp::{train_mlp, MlpModel, MlpParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlError {
    #[error("training set is empty")]
    Empty,
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("label {0} is not 0 or 1")]
    NonBinaryLabel(u8),
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("loss became non-finite at iteration {0}")]
    NonFiniteLoss(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Probability output shared by every model.
pub trait Classifier {
    fn predict_proba(&self, x: &[f64]) -> Result<f64, MlError>;

    fn predict_proba_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>, MlError> {
        rows.iter().map(|r| self.predict_proba(r)).collect()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Checks shapes, labels and finiteness; returns the feature count.
pub(crate) fn validate_training(x: &[Vec<f64>], y: &[u8]) -> Result<usize, MlError> {
    if x.is_empty() {
        return Err(MlError::Empty);
    }
    if x.len() != y.len() {
        return Err(MlError::LengthMismatch {
            rows: x.len(),
            labels: y.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&l| l > 1) {
        return Err(MlError::NonBinaryLabel(bad));
    }
    let dim = x[0].len();
    for r in x {
        check_dim(dim, r)?;
        if r.iter().any(|v| !v.is_finite()) {
            return Err(MlError::NonFiniteInput);
        }
    }
    Ok(dim)
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<(), MlError> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(MlError::DimensionMismatch {
            expected,
            found: x.len(),
        })
    }
}
