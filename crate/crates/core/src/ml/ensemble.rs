//! Majority vote over logistic regression, boosted trees and the MLP.

use serde::{Deserialize, Serialize};

use super::gbt::{train_gbt, GbtModel, GbtParams};
use super::logistic::{train_logistic, LogisticModel, LogisticParams};
use super::mlp::{train_mlp, MlpModel, MlpParams};
use super::{Classifier, MlError};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleParams {
    pub logistic: LogisticParams,
    pub gbt: GbtParams,
    pub mlp: MlpParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub logistic: LogisticModel,
    pub gbt: GbtModel,
    pub mlp: MlpModel,
    /// Decision thresholds for logistic, boosted trees and MLP, in that order.
    pub thresholds: [f64; 3],
}

/// 1 when at least two of the three votes are 1.
pub fn majority_vote(votes: [u8; 3]) -> u8 {
    u8::from(votes.iter().filter(|&&v| v == 1).count() >= 2)
}

pub fn train_ensemble(x: &[Vec<f64>], y: &[u8], params: &EnsembleParams) -> Result<EnsembleModel, MlError> {
    let ((logistic, gbt), mlp) = rayon::join(
        || {
            rayon::join(
                || train_logistic(x, y, &params.logistic),
                || train_gbt(x, y, &params.gbt),
            )
        },
        || train_mlp(x, y, &params.mlp),
    );
    Ok(EnsembleModel {
        logistic: logistic?,
        gbt: gbt?,
        mlp: mlp?,
        thresholds: [0.5; 3],
    })
}

impl EnsembleModel {
    pub fn probabilities(&self, x: &[f64]) -> Result<[f64; 3], MlError> {
        Ok([
            self.logistic.predict_proba(x)?,
            self.gbt.predict_proba(x)?,
            self.mlp.predict_proba(x)?,
        ])
    }

    pub fn votes(&self, x: &[f64]) -> Result<[u8; 3], MlError> {
        let p = self.probabilities(x)?;
        Ok([0, 1, 2].map(|i| u8::from(p[i] >= self.thresholds[i])))
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8, MlError> {
        Ok(majority_vote(self.votes(x)?))
    }
}
