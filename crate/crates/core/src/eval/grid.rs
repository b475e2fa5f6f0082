//! Exhaustive hyper-parameter search over cross-validation folds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::experiment::{fold_model_params, summarize, FoldData};
use super::metrics::Metrics;
use super::split::{split, SplitScheme};
use super::EvalError;
use crate::features::{FeatureMatrix, Modality};
use crate::ml::{
    majority_vote, train_ensemble, train_gbt, train_logistic, train_mlp, Classifier, EnsembleParams, MlError,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridModel {
    Lr,
    Xgb,
    Nn,
    Mfel,
}

impl GridModel {
    pub fn name(self) -> &'static str {
        match self {
            GridModel::Lr => "lr",
            GridModel::Xgb => "xgb",
            GridModel::Nn => "nn",
            GridModel::Mfel => "mfel",
        }
    }
}

impl fmt::Display for GridModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GridModel {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lr" | "logistic" => Ok(GridModel::Lr),
            "xgb" | "gbt" => Ok(GridModel::Xgb),
            "nn" | "mlp" => Ok(GridModel::Nn),
            "mfel" | "ensemble" => Ok(GridModel::Mfel),
            _ => Err(EvalError::UnknownModel(s.to_owned())),
        }
    }
}

/// Parameter name → candidate values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamGrid(pub BTreeMap<String, Vec<f64>>);

impl ParamGrid {
    /// Cartesian product in key order, values in the order given.
    pub fn points(&self) -> Vec<BTreeMap<String, f64>> {
        let mut out = vec![BTreeMap::new()];
        for (key, values) in &self.0 {
            out = out
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.insert(key.clone(), *v);
                        q
                    })
                })
                .collect();
        }
        out
    }
}

fn as_count(model: GridModel, key: &str, v: f64) -> Result<usize, EvalError> {
    if v >= 0.0 && v.fract() == 0.0 && v <= usize::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(MlError::InvalidParameter(format!("{model}.{key} must be a non-negative integer, got {v}")).into())
    }
}

fn set_one(params: &mut EnsembleParams, model: GridModel, key: &str, v: f64) -> Result<(), EvalError> {
    let unknown = || EvalError::UnknownParameter {
        model: model.name().to_owned(),
        param: key.to_owned(),
    };
    match model {
        GridModel::Lr => match key {
            "c" | "C" => params.logistic.c = v,
            "tol" => params.logistic.tol = v,
            "max_iter" => params.logistic.max_iter = as_count(model, key, v)?,
            _ => return Err(unknown()),
        },
        GridModel::Xgb => match key {
            "rounds" | "n_estimators" => params.gbt.rounds = as_count(model, key, v)?,
            "max_depth" | "depth" => params.gbt.max_depth = as_count(model, key, v)?,
            "learning_rate" | "lr" | "eta" => params.gbt.learning_rate = v,
            "gamma" => params.gbt.gamma = v,
            "reg_lambda" | "lambda" => params.gbt.reg_lambda = v,
            "scale_pos_weight" => params.gbt.scale_pos_weight = v,
            "min_child_weight" => params.gbt.min_child_weight = v,
            _ => return Err(unknown()),
        },
        GridModel::Nn => match key {
            "learning_rate" | "lr" => params.mlp.learning_rate = v,
            "batch_size" => params.mlp.batch_size = as_count(model, key, v)?,
            "dropout" => params.mlp.dropout = v,
            "epochs" => params.mlp.epochs = as_count(model, key, v)?,
            "patience" => params.mlp.patience = as_count(model, key, v)?,
            _ => return Err(unknown()),
        },
        GridModel::Mfel => {
            let (prefix, rest) = key.split_once('.').ok_or_else(unknown)?;
            let inner: GridModel = prefix.parse().map_err(|_| unknown())?;
            if inner == GridModel::Mfel {
                return Err(unknown());
            }
            set_one(params, inner, rest, v)?;
        }
    }
    Ok(())
}

/// Overrides `base` with one grid point. Ensemble points use prefixed keys
/// such as `xgb.max_depth`.
pub fn apply_point(base: &EnsembleParams, model: GridModel, point: &BTreeMap<String, f64>) -> Result<EnsembleParams, EvalError> {
    let mut p = base.clone();
    for (k, &v) in point {
        set_one(&mut p, model, k, v)?;
    }
    Ok(p)
}

fn point_label(point: &BTreeMap<String, f64>) -> String {
    point.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", ")
}

fn threshold(probs: Vec<f64>) -> Vec<u8> {
    probs.into_iter().map(|p| u8::from(p >= 0.5)).collect()
}

/// Trains `model` on the fold's training rows and predicts its test rows.
pub fn fit_predict(model: GridModel, train: &FeatureMatrix, test: &FeatureMatrix, params: &EnsembleParams) -> Result<Vec<u8>, EvalError> {
    let (x, y) = (&train.rows, &train.labels);
    Ok(match model {
        GridModel::Lr => threshold(train_logistic(x, y, &params.logistic)?.predict_proba_batch(&test.rows)?),
        GridModel::Xgb => threshold(train_gbt(x, y, &params.gbt)?.predict_proba_batch(&test.rows)?),
        GridModel::Nn => threshold(train_mlp(x, y, &params.mlp)?.predict_proba_batch(&test.rows)?),
        GridModel::Mfel => {
            let m = train_ensemble(x, y, params)?;
            test.rows
                .iter()
                .map(|r| m.votes(r).map(majority_vote))
                .collect::<Result<_, _>>()?
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub params: BTreeMap<String, f64>,
    pub label: String,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub model: GridModel,
    pub seed: u64,
    pub rows: Vec<GridRow>,
    /// Index into `rows` of the winner.
    pub best: usize,
}

impl GridResult {
    pub fn best_row(&self) -> &GridRow {
        &self.rows[self.best]
    }
}

/// Evaluates every grid point on every fold. The winner has the highest mean
/// accuracy, then F1, then the lexicographically smallest parameter label.
pub fn grid_search(
    folds: &[FoldData],
    model: GridModel,
    grid: &ParamGrid,
    base: &EnsembleParams,
    drop: &BTreeSet<Modality>,
    seed: u64,
) -> Result<GridResult, EvalError> {
    let points = grid.points();
    if grid.0.is_empty() || grid.0.values().any(Vec::is_empty) {
        return Err(EvalError::EmptyGrid);
    }
    let rows: Vec<GridRow> = points
        .par_iter()
        .map(|point| {
            let params = apply_point(base, model, point)?;
            let per_fold: Vec<(Vec<u8>, Vec<u8>)> = folds
                .iter()
                .map(|f| {
                    let p = fold_model_params(&params, seed, f.index);
                    let pred = fit_predict(model, &f.train.ablate(drop), &f.test.ablate(drop), &p)?;
                    Ok((f.test.labels.clone(), pred))
                })
                .collect::<Result<_, EvalError>>()?;
            Ok(GridRow {
                params: point.clone(),
                label: point_label(point),
                metrics: summarize(model.name(), &per_fold)?.metrics,
            })
        })
        .collect::<Result<_, EvalError>>()?;

    let best = (0..rows.len())
        .max_by(|&a, &b| {
            let (ra, rb) = (&rows[a], &rows[b]);
            ra.metrics
                .accuracy
                .total_cmp(&rb.metrics.accuracy)
                .then(ra.metrics.f1.total_cmp(&rb.metrics.f1))
                .then(rb.label.cmp(&ra.label))
        })
        .expect("grid has at least one point");
    Ok(GridResult {
        model,
        seed,
        rows,
        best,
    })
}

/// Folds over an already assembled matrix, for grids on fixed features.
pub fn matrix_folds(x: &FeatureMatrix, scheme: SplitScheme, seed: u64) -> Result<Vec<FoldData>, EvalError> {
    Ok(split(&x.labels, scheme, seed)?
        .into_iter()
        .enumerate()
        .map(|(index, f)| FoldData {
            index,
            train: x.select(&f.train),
            test: x.select(&f.test),
        })
        .collect())
}
