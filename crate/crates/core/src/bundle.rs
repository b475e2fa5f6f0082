//! Self-describing container for a trained pipeline: feature models, the
//! three classifiers and the metadata needed to reproduce them.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FittedFeaturizer, Modality};
use crate::lexicon::LexiconSource;
use crate::ml::EnsembleModel;

pub const BUNDLE_FORMAT: &str = "mfel-model-bundle";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed bundle: {0}")]
    Format(#[from] serde_json::Error),
    #[error("unsupported bundle {format} v{version}")]
    Unsupported { format: String, version: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub config_fingerprint: String,
    pub layout_fingerprint: String,
    pub lexicons: Vec<LexiconSource>,
    pub training_users: Vec<String>,
    /// Modalities removed before training.
    pub drop: BTreeSet<Modality>,
    pub featurizer: FittedFeaturizer,
    pub ensemble: EnsembleModel,
}

impl ModelBundle {
    pub fn new(
        seed: u64,
        config_fingerprint: String,
        lexicons: Vec<LexiconSource>,
        training_users: Vec<String>,
        drop: BTreeSet<Modality>,
        featurizer: FittedFeaturizer,
        ensemble: EnsembleModel,
    ) -> Self {
        Self {
            format: BUNDLE_FORMAT.to_owned(),
            version: BUNDLE_VERSION,
            seed,
            config_fingerprint,
            layout_fingerprint: featurizer.layout.without(&drop).0.fingerprint(),
            lexicons,
            training_users,
            drop,
            featurizer,
            ensemble,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("bundle serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, BundleError> {
        let b: ModelBundle = serde_json::from_str(s)?;
        if b.format != BUNDLE_FORMAT || b.version != BUNDLE_VERSION {
            return Err(BundleError::Unsupported {
                format: b.format,
                version: b.version,
            });
        }
        Ok(b)
    }

    pub fn save(&self, path: &Path) -> Result<(), BundleError> {
        std::fs::write(path, self.to_json()).map_err(|source| BundleError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, BundleError> {
        let s = std::fs::read_to_string(path).map_err(|source| BundleError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&s)
    }
}
