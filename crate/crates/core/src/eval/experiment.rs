//! Cross-validated runs of the full pipeline and the leave-one-modality-out
//! ablation.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{confusion, metrics, ConfusionCounts, Metrics};
use super::report::{EvalReport, ModelRow};
use super::split::{split, SplitScheme};
use super::EvalError;
use crate::corpus::LabeledDataset;
use crate::features::{combination_label, FeatureConfig, FeatureMatrix, FittedFeaturizer, Modality};
use crate::lexicon::Lexicons;
use crate::ml::{train_ensemble, EnsembleParams};
use crate::pipeline::{prepare_dataset, PrepareOptions, PreparedUser};
use crate::webcontext::UrlTitleCache;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub prepare: PrepareOptions,
    pub features: FeatureConfig,
    pub models: EnsembleParams,
    pub scheme: SplitScheme,
    pub seed: u64,
    /// Modalities left out of every model.
    pub drop: BTreeSet<Modality>,
}

impl ExperimentConfig {
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }
}

/// Featurized train and test partitions of one fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldData {
    pub index: usize,
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
}

const LDA_STREAM: u64 = 1;
const MLP_STREAM: u64 = 2;

/// Independent seed for one fold and purpose.
pub(crate) fn derive_seed(seed: u64, fold: usize, stream: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ ((fold as u64) << 16 | stream).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn fold_model_params(models: &EnsembleParams, seed: u64, fold: usize) -> EnsembleParams {
    let mut p = models.clone();
    p.mlp.seed = derive_seed(seed, fold, MLP_STREAM);
    p
}

impl ExperimentConfig {
    /// Feature settings for fold `fold`, with the topic-model seed derived
    /// from the master seed.
    pub fn fold_features(&self, fold: usize) -> FeatureConfig {
        let mut fc = self.features.clone();
        fc.lda.seed = derive_seed(self.seed, fold, LDA_STREAM);
        fc
    }

    /// Model settings for fold `fold`, with the MLP seed derived from the
    /// master seed. A model trained outside cross-validation uses fold 0.
    pub fn fold_models(&self, fold: usize) -> EnsembleParams {
        fold_model_params(&self.models, self.seed, fold)
    }
}

fn pick(users: &[PreparedUser], idx: &[usize]) -> Vec<PreparedUser> {
    idx.iter().map(|&i| users[i].clone()).collect()
}

/// Splits the dataset and featurizes every fold, fitting the topic model,
/// PCA and activity scaling on that fold's training users only.
pub fn prepare_folds(
    ds: &LabeledDataset,
    titles: &UrlTitleCache,
    lexicons: &Lexicons,
    config: &ExperimentConfig,
) -> Result<Vec<FoldData>, EvalError> {
    let prepared = prepare_dataset(ds, titles, &lexicons.stopwords, &config.prepare);
    let folds = split(&ds.labels(), config.scheme, config.seed)?;
    folds
        .par_iter()
        .enumerate()
        .map(|(k, f)| {
            let train_users = pick(&prepared, &f.train);
            let featurizer = FittedFeaturizer::fit(&train_users, lexicons, &config.fold_features(k))?;
            Ok(FoldData {
                index: k,
                train: featurizer.transform(&train_users, lexicons)?,
                test: featurizer.transform(&pick(&prepared, &f.test), lexicons)?,
            })
        })
        .collect()
}

/// Test-set predictions of the three base models and the vote.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldPredictions {
    pub lr: Vec<u8>,
    pub xgb: Vec<u8>,
    pub nn: Vec<u8>,
    pub mfel: Vec<u8>,
}

pub fn predict_fold(fold: &FoldData, drop: &BTreeSet<Modality>, params: &EnsembleParams) -> Result<FoldPredictions, EvalError> {
    let train = fold.train.ablate(drop);
    let test = fold.test.ablate(drop);
    let model = train_ensemble(&train.rows, &train.labels, params)?;
    let mut out = FoldPredictions {
        lr: Vec::new(),
        xgb: Vec::new(),
        nn: Vec::new(),
        mfel: Vec::new(),
    };
    for row in &test.rows {
        let v = model.votes(row)?;
        out.lr.push(v[0]);
        out.xgb.push(v[1]);
        out.nn.push(v[2]);
        out.mfel.push(crate::ml::majority_vote(v));
    }
    Ok(out)
}

pub(crate) fn summarize(name: &str, per_fold: &[(Vec<u8>, Vec<u8>)]) -> Result<ModelRow, EvalError> {
    let mut total = ConfusionCounts::default();
    let mut fold_metrics = Vec::with_capacity(per_fold.len());
    for (truth, pred) in per_fold {
        let c = confusion(truth, pred)?;
        total.add(&c);
        fold_metrics.push(metrics(&c)?);
    }
    Ok(ModelRow {
        name: name.to_owned(),
        metrics: Metrics::mean(&fold_metrics),
        confusion: total,
        fold_metrics,
    })
}

pub fn build_report(title: &str, ds: &LabeledDataset, config: &ExperimentConfig, rows: Vec<ModelRow>) -> EvalReport {
    EvalReport {
        title: title.to_owned(),
        dataset: ds.source_name.clone(),
        users: ds.users.len(),
        scheme: config.scheme,
        seed: config.seed,
        config_fingerprint: config.fingerprint(),
        rows,
    }
}

/// LR, XGB, NN and MFEL rows over already featurized folds.
pub fn evaluate_folds(folds: &[FoldData], config: &ExperimentConfig) -> Result<Vec<ModelRow>, EvalError> {
    let preds: Vec<FoldPredictions> = folds
        .par_iter()
        .map(|f| predict_fold(f, &config.drop, &fold_model_params(&config.models, config.seed, f.index)))
        .collect::<Result<_, _>>()?;
    let truth = |f: &FoldData| f.test.labels.clone();
    let collect = |sel: fn(&FoldPredictions) -> &Vec<u8>| -> Vec<(Vec<u8>, Vec<u8>)> {
        folds.iter().zip(&preds).map(|(f, p)| (truth(f), sel(p).clone())).collect()
    };
    Ok(vec![
        summarize("LR", &collect(|p| &p.lr))?,
        summarize("XGB", &collect(|p| &p.xgb))?,
        summarize("NN", &collect(|p| &p.nn))?,
        summarize("MFEL", &collect(|p| &p.mfel))?,
    ])
}

pub fn run_experiment(
    ds: &LabeledDataset,
    titles: &UrlTitleCache,
    lexicons: &Lexicons,
    config: &ExperimentConfig,
) -> Result<EvalReport, EvalError> {
    let folds = prepare_folds(ds, titles, lexicons, config)?;
    Ok(build_report("Model comparison", ds, config, evaluate_folds(&folds, config)?))
}

/// Row order of the ablation table: leave out v, e, d, u, t, then nothing.
pub const ABLATION_ORDER: [Option<Modality>; 6] = [
    Some(Modality::Visual),
    Some(Modality::Emotional),
    Some(Modality::Depression),
    Some(Modality::User),
    Some(Modality::Topic),
    None,
];

/// Ensemble rows for every leave-one-modality-out combination plus the
/// full model. Base-model seeds match [`evaluate_folds`], so the full row
/// equals the MFEL row of a run without dropped modalities.
pub fn ablation_from_folds(folds: &[FoldData], config: &ExperimentConfig) -> Result<Vec<ModelRow>, EvalError> {
    let all: BTreeSet<Modality> = folds
        .first()
        .map(|f| f.train.layout.modalities())
        .unwrap_or_default();
    ABLATION_ORDER
        .iter()
        .map(|left_out| {
            let drop: BTreeSet<Modality> = left_out.iter().copied().collect();
            let kept: BTreeSet<Modality> = all.difference(&drop).copied().collect();
            let per_fold: Vec<(Vec<u8>, Vec<u8>)> = folds
                .par_iter()
                .map(|f| {
                    let p = predict_fold(f, &drop, &fold_model_params(&config.models, config.seed, f.index))?;
                    Ok((f.test.labels.clone(), p.mfel))
                })
                .collect::<Result<_, EvalError>>()?;
            summarize(&combination_label(&kept), &per_fold)
        })
        .collect()
}

pub fn ablation_suite(
    ds: &LabeledDataset,
    titles: &UrlTitleCache,
    lexicons: &Lexicons,
    config: &ExperimentConfig,
) -> Result<EvalReport, EvalError> {
    let folds = prepare_folds(ds, titles, lexicons, config)?;
    Ok(build_report("Modality ablation", ds, config, ablation_from_folds(&folds, config)?))
}
