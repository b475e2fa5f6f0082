//! Metrics, data splitting, cross-validated experiments, ablation and grid
//! search.

pub mod experiment;
pub mod grid;
pub mod metrics;
pub mod report;
pub mod split;

use thiserror::Error;

use crate::features::FeatureError;
use crate::ml::MlError;

pub use experiment::{ablation_from_folds, ablation_suite, evaluate_folds, prepare_folds, run_experiment, ExperimentConfig, FoldData};
pub use grid::{grid_search, GridModel, GridResult, GridRow, ParamGrid};
pub use metrics::{confusion, metrics, ConfusionCounts, Metrics};
pub use report::{EvalReport, ModelRow};
pub use split::{split, Fold, SplitScheme};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{truth} true labels but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("label {0} is not 0 or 1")]
    NonBinaryLabel(u8),
    #[error("cannot compute metrics over an empty population")]
    EmptyPopulation,
    #[error("only one class present; both are needed to split")]
    SingleClass,
    #[error("fold too small: {0}")]
    FoldTooSmall(String),
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error("unknown parameter {param:?} for model {model}")]
    UnknownParameter { model: String, param: String },
    #[error("unknown model {0:?} (expected lr, xgb, nn or mfel)")]
    UnknownModel(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] MlError),
}
