//! Per-user multimodal feature vectors and their named layout.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{clean_text, Stopwords, UserRecord};
use crate::dimred::{fit_pca, PcaError, PcaModel};
use crate::lexicon::{
    category_counts_with, emoji_sentiment, emotion_intensity_with, split_depression, EmotionLexicon, Lexicons,
    Normalization,
};
use crate::pipeline::PreparedUser;
use crate::topics::{fit_lda, LdaParams, TopicError, TopicModel};

pub const EMOTION_DIM: usize = 10;
pub const EMOJI_DIM: usize = 3;
pub const ACTIVITY_DIM: usize = 5;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("user {user_id}: image embedding has {found} dims, expected {expected}")]
    MixedEmbeddingDims {
        user_id: String,
        expected: usize,
        found: usize,
    },
    #[error("segment {segment}: layout says {expected} dims, got {found}")]
    LayoutMismatch {
        segment: Segment,
        expected: usize,
        found: usize,
    },
    #[error("unknown modality {0:?} (expected one of v, t, e, d, u)")]
    UnknownModality(String),
    #[error("invalid feature layout: {0}")]
    InvalidLayout(String),
    #[error("no training users to fit on")]
    NoTrainingUsers,
    #[error("user {0}: feature vector has non-finite entries")]
    NonFinite(String),
    #[error("topic model: {0}")]
    Topic(#[from] TopicError),
    #[error("pca: {0}")]
    Pca(#[from] PcaError),
}

/// One named block of the feature vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Visual,
    Topic,
    Emotion,
    Emoji,
    LexiconPca,
    Depression,
    UserActivity,
    DescriptionEmotion,
}

impl Segment {
    pub fn name(self) -> &'static str {
        match self {
            Segment::Visual => "visual",
            Segment::Topic => "topic",
            Segment::Emotion => "emotion",
            Segment::Emoji => "emoji",
            Segment::LexiconPca => "lexicon_pca",
            Segment::Depression => "depression",
            Segment::UserActivity => "user_activity",
            Segment::DescriptionEmotion => "description_emotion",
        }
    }

    pub fn modality(self) -> Modality {
        match self {
            Segment::Visual => Modality::Visual,
            Segment::Topic => Modality::Topic,
            Segment::Emotion | Segment::Emoji | Segment::LexiconPca | Segment::DescriptionEmotion => Modality::Emotional,
            Segment::Depression => Modality::Depression,
            Segment::UserActivity => Modality::User,
        }
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ablation groups, written as single letters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "v")]
    Visual,
    #[serde(rename = "t")]
    Topic,
    #[serde(rename = "e")]
    Emotional,
    #[serde(rename = "d")]
    Depression,
    #[serde(rename = "u")]
    User,
}

impl Modality {
    pub const ALL: [Modality; 5] = [
        Modality::Visual,
        Modality::Topic,
        Modality::Emotional,
        Modality::Depression,
        Modality::User,
    ];

    pub fn letter(self) -> char {
        match self {
            Modality::Visual => 'v',
            Modality::Topic => 't',
            Modality::Emotional => 'e',
            Modality::Depression => 'd',
            Modality::User => 'u',
        }
    }
}

impl FromStr for Modality {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "v" | "visual" => Ok(Modality::Visual),
            "t" | "topic" => Ok(Modality::Topic),
            "e" | "emotion" | "emotional" => Ok(Modality::Emotional),
            "d" | "depression" => Ok(Modality::Depression),
            "u" | "user" => Ok(Modality::User),
            other => Err(FeatureError::UnknownModality(other.to_owned())),
        }
    }
}

/// Parses a comma- or plus-separated modality list such as `"v,t"` or `"t+e"`.
pub fn parse_modalities(s: &str) -> Result<BTreeSet<Modality>, FeatureError> {
    s.split([',', '+'])
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// Label such as `MFEL (v+t+e+d+u)` for the modalities a model was given.
pub fn combination_label(kept: &BTreeSet<Modality>) -> String {
    let letters: Vec<String> = Modality::ALL
        .iter()
        .filter(|m| kept.contains(m))
        .map(|m| m.letter().to_string())
        .collect();
    format!("MFEL ({})", letters.join("+"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub segment: Segment,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub segments: Vec<SegmentSpec>,
}

impl FeatureLayout {
    pub fn new(segments: Vec<SegmentSpec>) -> Result<Self, FeatureError> {
        let mut seen = BTreeSet::new();
        for s in &segments {
            if s.dim == 0 {
                return Err(FeatureError::InvalidLayout(format!("segment {} has zero width", s.segment)));
            }
            if !seen.insert(s.segment) {
                return Err(FeatureError::InvalidLayout(format!("segment {} repeated", s.segment)));
            }
        }
        Ok(Self { segments })
    }

    /// The full layout for the given visual width, topic count and PCA width.
    pub fn standard(visual_dim: usize, topics: usize, pca_components: usize) -> Result<Self, FeatureError> {
        Self::new(vec![
            SegmentSpec { segment: Segment::Visual, dim: visual_dim },
            SegmentSpec { segment: Segment::Topic, dim: topics },
            SegmentSpec { segment: Segment::Emotion, dim: EMOTION_DIM },
            SegmentSpec { segment: Segment::Emoji, dim: EMOJI_DIM },
            SegmentSpec { segment: Segment::LexiconPca, dim: pca_components },
            SegmentSpec { segment: Segment::Depression, dim: 1 },
            SegmentSpec { segment: Segment::UserActivity, dim: ACTIVITY_DIM },
            SegmentSpec { segment: Segment::DescriptionEmotion, dim: EMOTION_DIM },
        ])
    }

    pub fn total(&self) -> usize {
        self.segments.iter().map(|s| s.dim).sum()
    }

    pub fn range(&self, segment: Segment) -> Option<Range<usize>> {
        let mut start = 0;
        for s in &self.segments {
            if s.segment == segment {
                return Some(start..start + s.dim);
            }
            start += s.dim;
        }
        None
    }

    pub fn modalities(&self) -> BTreeSet<Modality> {
        self.segments.iter().map(|s| s.segment.modality()).collect()
    }

    /// Layout with every segment of the dropped modalities removed, plus the
    /// surviving column indices of the original layout.
    pub fn without(&self, drop: &BTreeSet<Modality>) -> (FeatureLayout, Vec<usize>) {
        let mut kept = Vec::new();
        let mut columns = Vec::new();
        let mut start = 0;
        for s in &self.segments {
            if !drop.contains(&s.segment.modality()) {
                kept.push(*s);
                columns.extend(start..start + s.dim);
            }
            start += s.dim;
        }
        (FeatureLayout { segments: kept }, columns)
    }

    /// Column names such as `topic_3`.
    pub fn column_names(&self) -> Vec<String> {
        self.segments
            .iter()
            .flat_map(|s| (0..s.dim).map(move |i| format!("{}_{}", s.segment, i)))
            .collect()
    }

    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("layout serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub user_id: String,
    pub values: Vec<f64>,
}

/// Rows of feature vectors sharing one layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub layout: FeatureLayout,
    pub user_ids: Vec<String>,
    pub labels: Vec<u8>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.layout.total()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            layout: self.layout.clone(),
            user_ids: indices.iter().map(|&i| self.user_ids[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn ablate(&self, drop: &BTreeSet<Modality>) -> FeatureMatrix {
        let (layout, columns) = self.layout.without(drop);
        FeatureMatrix {
            layout,
            user_ids: self.user_ids.clone(),
            labels: self.labels.clone(),
            rows: self.rows.iter().map(|r| columns.iter().map(|&c| r[c]).collect()).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("feature matrix serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Removes the named modalities from a matrix. Names are the single
/// letters `v`, `t`, `e`, `d`, `u`.
pub fn ablate<S: AsRef<str>>(x: &FeatureMatrix, drop: &[S]) -> Result<FeatureMatrix, FeatureError> {
    let drop: BTreeSet<Modality> = drop.iter().map(|s| s.as_ref().parse()).collect::<Result<_, _>>()?;
    Ok(x.ablate(&drop))
}

/// Mean of every image embedding the user posted; zeros without images.
pub fn visual_feature(u: &UserRecord, dim: usize) -> Result<Vec<f64>, FeatureError> {
    let mut sum = vec![0.0; dim];
    let mut n = 0usize;
    for e in u.tweets.iter().flat_map(|t| &t.image_embeddings) {
        if e.len() != dim {
            return Err(FeatureError::MixedEmbeddingDims {
                user_id: u.user_id.clone(),
                expected: dim,
                found: e.len(),
            });
        }
        for (s, v) in sum.iter_mut().zip(e) {
            *s += v;
        }
        n += 1;
    }
    if n > 0 {
        sum.iter_mut().for_each(|s| *s /= n as f64);
    }
    Ok(sum)
}

/// Activity counts followed by the emotion intensity of the cleaned profile
/// description: `[tweets, followers, friends, favourites, statuses, emotions…]`.
pub fn user_feature(
    u: &UserRecord,
    stopwords: &Stopwords,
    lex: &EmotionLexicon,
    window_tweet_count: usize,
) -> [f64; ACTIVITY_DIM + EMOTION_DIM] {
    let desc = clean_text(&u.profile.description, stopwords);
    user_feature_from_clean(u, &desc, lex, window_tweet_count, Normalization::Frequency)
}

fn user_feature_from_clean(
    u: &UserRecord,
    description_clean: &str,
    lex: &EmotionLexicon,
    window_tweet_count: usize,
    norm: Normalization,
) -> [f64; ACTIVITY_DIM + EMOTION_DIM] {
    let mut out = [0.0; ACTIVITY_DIM + EMOTION_DIM];
    out[..ACTIVITY_DIM].copy_from_slice(&activity_counts(u, window_tweet_count));
    out[ACTIVITY_DIM..].copy_from_slice(&emotion_intensity_with(description_clean, lex, norm));
    out
}

fn activity_counts(u: &UserRecord, window_tweet_count: usize) -> [f64; ACTIVITY_DIM] {
    let p = &u.profile;
    [
        window_tweet_count as f64,
        p.followers_count as f64,
        p.friends_count as f64,
        p.favourites_count as f64,
        p.statuses_count as f64,
    ]
}

/// Per-user mean of per-tweet category vectors (general categories plus the
/// trailing depression category). Zeros for users without tweets.
pub fn category_mean(u: &PreparedUser, lexicons: &Lexicons, norm: Normalization) -> Vec<f64> {
    let mut mean = vec![0.0; lexicons.categories.len()];
    for t in &u.tweets {
        for (m, v) in mean.iter_mut().zip(category_counts_with(&t.clean, &lexicons.categories, norm)) {
            *m += v;
        }
    }
    if !u.tweets.is_empty() {
        let n = u.tweets.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
    }
    mean
}

/// The text-derived feature segments of one user.
#[derive(Clone, Debug, PartialEq)]
pub struct TextualFeatures {
    pub topic: Vec<f64>,
    pub emotion: [f64; EMOTION_DIM],
    pub emoji: [f64; EMOJI_DIM],
    pub lexicon_pca: Vec<f64>,
    pub depression: f64,
}

/// Fitted models the textual features depend on.
pub struct TextualDeps<'a> {
    pub lexicons: &'a Lexicons,
    pub topic_model: &'a TopicModel,
    pub pca: &'a PcaModel,
    pub fold_iterations: usize,
    pub normalization: Normalization,
}

pub fn textual_features(u: &PreparedUser, deps: &TextualDeps<'_>, fold_seed: u64) -> Result<TextualFeatures, FeatureError> {
    let topic = deps
        .topic_model
        .doc_topic_dist(&u.tokens(), deps.fold_iterations, fold_seed);
    if u.tweets.is_empty() {
        return Ok(TextualFeatures {
            topic,
            emotion: [0.0; EMOTION_DIM],
            emoji: [0.0; EMOJI_DIM],
            lexicon_pca: vec![0.0; deps.pca.k()],
            depression: 0.0,
        });
    }

    let n = u.tweets.len() as f64;
    let mut emotion = [0.0; EMOTION_DIM];
    let mut emoji = [0.0; EMOJI_DIM];
    for t in &u.tweets {
        let e = emotion_intensity_with(&t.clean, &deps.lexicons.emotion, deps.normalization);
        emotion.iter_mut().zip(e).for_each(|(a, v)| *a += v);
        let s = emoji_sentiment(&t.raw, &deps.lexicons.emoji).scores;
        emoji.iter_mut().zip(s).for_each(|(a, v)| *a += v);
    }
    emotion.iter_mut().for_each(|a| *a /= n);
    emoji.iter_mut().for_each(|a| *a /= n);

    let (general, depression) = split_depression(&category_mean(u, deps.lexicons, deps.normalization));
    Ok(TextualFeatures {
        topic,
        emotion,
        emoji,
        lexicon_pca: deps.pca.transform(&general)?,
        depression,
    })
}

/// Which users' documents train the topic model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicTraining {
    #[default]
    DepressedOnly,
    AllUsers,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub visual_dim: usize,
    pub lda: LdaParams,
    pub fold_iterations: usize,
    pub pca_components: usize,
    pub topic_training: TopicTraining,
    pub normalization: Normalization,
    /// Z-score the activity counts with training-split statistics.
    pub standardize_activity: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            visual_dim: 128,
            lda: LdaParams::default(),
            fold_iterations: 50,
            pca_components: 90,
            topic_training: TopicTraining::default(),
            normalization: Normalization::default(),
            standardize_activity: true,
        }
    }
}

impl FeatureConfig {
    pub fn layout(&self) -> Result<FeatureLayout, FeatureError> {
        FeatureLayout::standard(self.visual_dim, self.lda.topics, self.pca_components)
    }
}

/// Training-split mean and standard deviation of the activity counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivityScaler {
    pub mean: [f64; ACTIVITY_DIM],
    pub std: [f64; ACTIVITY_DIM],
}

impl ActivityScaler {
    pub fn fit(rows: &[[f64; ACTIVITY_DIM]]) -> Self {
        let n = rows.len().max(1) as f64;
        let mut mean = [0.0; ACTIVITY_DIM];
        let mut std = [0.0; ACTIVITY_DIM];
        for r in rows {
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v / n);
        }
        for r in rows {
            for j in 0..ACTIVITY_DIM {
                std[j] += (r[j] - mean[j]).powi(2) / n;
            }
        }
        // Constant columns would divide by zero; leave them centred only.
        std.iter_mut().for_each(|s| *s = if *s > 0.0 { s.sqrt() } else { 1.0 });
        Self { mean, std }
    }

    pub fn apply(&self, x: &mut [f64]) {
        for ((v, m), s) in x.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }
}

/// Everything learned from a training split that feature extraction needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedFeaturizer {
    pub config: FeatureConfig,
    pub layout: FeatureLayout,
    pub topic_model: TopicModel,
    pub pca: PcaModel,
    pub activity: Option<ActivityScaler>,
}

impl FittedFeaturizer {
    /// Fits the topic model, the category PCA and the activity scaler on
    /// training users only.
    pub fn fit(train: &[PreparedUser], lexicons: &Lexicons, config: &FeatureConfig) -> Result<Self, FeatureError> {
        if train.is_empty() {
            return Err(FeatureError::NoTrainingUsers);
        }
        let layout = config.layout()?;

        let docs: Vec<Vec<String>> = train
            .iter()
            .filter(|u| config.topic_training == TopicTraining::AllUsers || u.record.is_depressed())
            .map(|u| u.tokens().into_iter().map(str::to_owned).collect())
            .collect();
        let topic_model = fit_lda(&docs, &config.lda)?;

        let general: Vec<Vec<f64>> = train
            .iter()
            .map(|u| split_depression(&category_mean(u, lexicons, config.normalization)).0)
            .collect();
        let pca = fit_pca(&general, config.pca_components)?;

        let activity = config.standardize_activity.then(|| {
            let rows: Vec<[f64; ACTIVITY_DIM]> = train
                .iter()
                .map(|u| activity_counts(&u.record, u.record.tweets.len()))
                .collect();
            ActivityScaler::fit(&rows)
        });

        Ok(Self {
            config: config.clone(),
            layout,
            topic_model,
            pca,
            activity,
        })
    }

    /// Seed for one user's topic fold-in, independent of row order.
    pub fn fold_seed(&self, user_id: &str) -> u64 {
        let digest = Sha256::digest(user_id.as_bytes());
        let mut b = [0u8; 8];
        b.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(b) ^ self.config.lda.seed
    }

    pub fn assemble(&self, u: &PreparedUser, lexicons: &Lexicons) -> Result<FeatureVector, FeatureError> {
        let deps = TextualDeps {
            lexicons,
            topic_model: &self.topic_model,
            pca: &self.pca,
            fold_iterations: self.config.fold_iterations,
            normalization: self.config.normalization,
        };
        let text = textual_features(u, &deps, self.fold_seed(&u.record.user_id))?;
        let mut user = user_feature_from_clean(
            &u.record,
            &u.description_clean,
            &lexicons.emotion,
            u.record.tweets.len(),
            self.config.normalization,
        );
        if let Some(scaler) = &self.activity {
            scaler.apply(&mut user[..ACTIVITY_DIM]);
        }
        let visual = visual_feature(&u.record, self.config.visual_dim)?;

        let mut values = Vec::with_capacity(self.layout.total());
        for spec in &self.layout.segments {
            let part: &[f64] = match spec.segment {
                Segment::Visual => &visual,
                Segment::Topic => &text.topic,
                Segment::Emotion => &text.emotion,
                Segment::Emoji => &text.emoji,
                Segment::LexiconPca => &text.lexicon_pca,
                Segment::Depression => std::slice::from_ref(&text.depression),
                Segment::UserActivity => &user[..ACTIVITY_DIM],
                Segment::DescriptionEmotion => &user[ACTIVITY_DIM..],
            };
            if part.len() != spec.dim {
                return Err(FeatureError::LayoutMismatch {
                    segment: spec.segment,
                    expected: spec.dim,
                    found: part.len(),
                });
            }
            values.extend_from_slice(part);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite(u.record.user_id.clone()));
        }
        Ok(FeatureVector {
            user_id: u.record.user_id.clone(),
            values,
        })
    }

    pub fn transform(&self, users: &[PreparedUser], lexicons: &Lexicons) -> Result<FeatureMatrix, FeatureError> {
        let rows: Vec<FeatureVector> = users
            .par_iter()
            .map(|u| self.assemble(u, lexicons))
            .collect::<Result<_, _>>()?;
        Ok(FeatureMatrix {
            layout: self.layout.clone(),
            user_ids: rows.iter().map(|r| r.user_id.clone()).collect(),
            labels: users.iter().map(|u| u.record.label).collect(),
            rows: rows.into_iter().map(|r| r.values).collect(),
        })
    }
}
