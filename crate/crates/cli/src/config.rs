//! Sectioned TOML configuration merged with command-line overrides.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mfel::eval::{ExperimentConfig, SplitScheme};
use mfel::features::{parse_modalities, FeatureConfig};
use mfel::lexicon::{LexiconPaths, Lexicons, Normalization};
use mfel::ml::EnsembleParams;
use mfel::pipeline::PrepareOptions;
use serde::Deserialize;

/// Layout of a config file. Every section and key is optional.
///
/// ```toml
/// [data]
/// dataset = "corpus.jsonl"
/// cache = "titles.json"
/// offline = true
///
/// [run]
/// seed = 42
/// out = "runs/a"
/// folds = 5
/// drop = "v"
///
/// [features.lda]
/// topics = 20
///
/// [models.gbt]
/// max_depth = 6
/// ```
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub data: DataSection,
    pub run: RunSection,
    pub prepare: PrepareOptions,
    pub features: FeatureConfig,
    pub models: EnsembleParams,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub dataset: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub offline: bool,
    /// All five lexicon files; the bundled lexicons are used when absent.
    pub lexicons: Option<LexiconPaths>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub folds: Option<usize>,
    pub holdout: Option<f64>,
    pub drop: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: FileConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // Relative paths in a config file are relative to the file itself.
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.data.dataset.as_mut().map(fix);
        cfg.data.cache.as_mut().map(fix);
        cfg.run.out.as_mut().map(fix);
        if let Some(l) = cfg.data.lexicons.as_mut() {
            for p in [&mut l.stopwords, &mut l.emotion, &mut l.emoji, &mut l.categories, &mut l.depression_terms] {
                fix(p);
            }
        }
        Ok(cfg)
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub dataset: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub offline: bool,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub folds: Option<usize>,
    pub holdout: Option<f64>,
    pub drop: Option<String>,
    pub raw_counts: bool,
}

/// Fully resolved settings for one invocation.
#[derive(Debug)]
pub struct Settings {
    pub dataset: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub offline: bool,
    pub lexicon_paths: Option<LexiconPaths>,
    pub out: PathBuf,
    /// Set when a holdout split was asked for rather than k folds.
    pub holdout: Option<f64>,
    pub experiment: ExperimentConfig,
}

pub const DEFAULT_SEED: u64 = 42;

impl Settings {
    pub fn resolve(file: FileConfig, cli: Overrides) -> Result<Self> {
        // Flags beat the file as a pair, so `--holdout` overrides a configured
        // fold count rather than clashing with it.
        let (holdout, folds) = if cli.holdout.is_some() || cli.folds.is_some() {
            (cli.holdout, cli.folds)
        } else {
            (file.run.holdout, file.run.folds)
        };
        let scheme = match (holdout, folds) {
            (Some(_), Some(_)) => bail!("choose either folds or a holdout fraction, not both"),
            (Some(f), None) => {
                if !(f > 0.0 && f < 1.0) {
                    bail!("holdout fraction must lie strictly between 0 and 1, got {f}");
                }
                SplitScheme::Holdout(f)
            }
            (None, Some(k)) => {
                if k < 2 {
                    bail!("need at least 2 folds, got {k}");
                }
                SplitScheme::KFold(k)
            }
            (None, None) => SplitScheme::default(),
        };
        let drop = match cli.drop.as_deref().or(file.run.drop.as_deref()) {
            Some(s) if !s.trim().is_empty() => parse_modalities(s)?,
            _ => BTreeSet::new(),
        };
        let mut features = file.features;
        if cli.raw_counts {
            features.normalization = Normalization::RawCounts;
        }
        let experiment = ExperimentConfig {
            prepare: file.prepare,
            features,
            models: file.models,
            scheme,
            seed: cli.seed.or(file.run.seed).unwrap_or(DEFAULT_SEED),
            drop,
        };
        Ok(Self {
            dataset: cli.dataset.or(file.data.dataset),
            cache: cli.cache.or(file.data.cache),
            offline: cli.offline || file.data.offline,
            lexicon_paths: file.data.lexicons,
            out: cli.out.or(file.run.out).unwrap_or_else(|| PathBuf::from("mfel-out")),
            holdout,
            experiment,
        })
    }

    pub fn dataset(&self) -> Result<&Path> {
        match &self.dataset {
            Some(p) if !p.as_os_str().is_empty() => Ok(p),
            _ => bail!("no dataset given; pass --dataset <path> or set data.dataset in the config"),
        }
    }

    pub fn lexicons(&self) -> Result<Lexicons> {
        match &self.lexicon_paths {
            Some(paths) => Ok(Lexicons::load(paths)?),
            None => Ok(Lexicons::bundled()),
        }
    }
}
