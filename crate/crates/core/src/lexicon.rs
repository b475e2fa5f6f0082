//! Dictionary-based textual features: emotion intensity, emoji sentiment and
//! category frequencies (including the depression keyword category).
//!
//! File formats:
//! - emotion lexicon: TSV `word<TAB>tag[,tag...]`
//! - emoji table: CSV `emoji,pos,neg,neutral`
//! - categories: TSV `category<TAB>word` or a directory of `<category>.txt`
//!   files (one word per line, loaded in file-name order)
//! - depression terms: one word per line
//!
//! Category order is load order and fixes the feature index.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Stopwords;
use crate::text::{emoji_base_key, emoji_graphemes, emoji_key};

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{source_name} line {line}: {reason}")]
    Parse {
        source_name: String,
        line: usize,
        reason: String,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn read(path: &Path) -> Result<String, LexiconError> {
    fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Non-blank, non-comment lines with their 1-based line numbers.
fn data_lines(contents: &str) -> impl Iterator<Item = (usize, &str)> {
    contents
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Emotion {
    Joy,
    Fear,
    Anger,
    Anticipation,
    Disgust,
    Trust,
    Surprise,
    Positive,
    Negative,
    Sadness,
}

impl Emotion {
    /// Fixed feature order.
    pub const ALL: [Emotion; 10] = [
        Emotion::Joy,
        Emotion::Fear,
        Emotion::Anger,
        Emotion::Anticipation,
        Emotion::Disgust,
        Emotion::Trust,
        Emotion::Surprise,
        Emotion::Positive,
        Emotion::Negative,
        Emotion::Sadness,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Joy => "Joy",
            Emotion::Fear => "Fear",
            Emotion::Anger => "Anger",
            Emotion::Anticipation => "Anticipation",
            Emotion::Disgust => "Disgust",
            Emotion::Trust => "Trust",
            Emotion::Surprise => "Surprise",
            Emotion::Positive => "Positive",
            Emotion::Negative => "Negative",
            Emotion::Sadness => "Sadness",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Emotion> {
        Emotion::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(tag.trim()))
    }
}

/// How per-text counts are turned into features.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by the token count of the text.
    #[default]
    Frequency,
    /// Keep raw occurrence counts.
    RawCounts,
}

impl Normalization {
    fn apply(self, counts: &mut [f64], tokens: usize) {
        if self == Normalization::Frequency && tokens > 0 {
            let n = tokens as f64;
            counts.iter_mut().for_each(|c| *c /= n);
        }
    }
}

/// Word → emotion tag set; lookups are case-insensitive.
#[derive(Clone, Debug, Default)]
pub struct EmotionLexicon {
    words: HashMap<String, u16>,
}

impl EmotionLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: &str, emotions: &[Emotion]) {
        let mask = self.words.entry(word.to_lowercase()).or_insert(0);
        for e in emotions {
            *mask |= 1 << e.index();
        }
    }

    pub fn parse(contents: &str, source_name: &str) -> Result<Self, LexiconError> {
        let mut lex = Self::new();
        for (line, l) in data_lines(contents) {
            let err = |reason: String| LexiconError::Parse {
                source_name: source_name.to_owned(),
                line,
                reason,
            };
            let (word, tags) = l
                .split_once('\t')
                .ok_or_else(|| err("expected `word<TAB>tags`".into()))?;
            let word = word.trim();
            if word.is_empty() {
                return Err(err("empty word".into()));
            }
            let mut emotions = Vec::new();
            for tag in tags.split(',').filter(|t| !t.trim().is_empty()) {
                emotions.push(Emotion::from_tag(tag).ok_or_else(|| err(format!("unknown emotion `{tag}`")))?);
            }
            lex.insert(word, &emotions);
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        Self::parse(&read(path)?, &path.display().to_string())
    }

    pub fn emotions(&self, word: &str) -> impl Iterator<Item = Emotion> {
        let mask = self
            .words
            .get(word)
            .copied()
            .or_else(|| self.words.get(&word.to_lowercase()).copied())
            .unwrap_or(0);
        Emotion::ALL
            .into_iter()
            .filter(move |e| mask & (1 << e.index()) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Per-emotion share of tokens tagged with that emotion, in [`Emotion::ALL`]
/// order. Empty text gives the zero vector.
pub fn emotion_intensity(text: &str, lex: &EmotionLexicon) -> [f64; 10] {
    emotion_intensity_with(text, lex, Normalization::Frequency)
}

pub fn emotion_intensity_with(text: &str, lex: &EmotionLexicon, norm: Normalization) -> [f64; 10] {
    let mut counts = [0.0; 10];
    let mut tokens = 0;
    for tok in text.split_whitespace() {
        tokens += 1;
        for e in lex.emotions(tok) {
            counts[e.index()] += 1.0;
        }
    }
    norm.apply(&mut counts, tokens);
    counts
}

/// Emoji → (positive, negative, neutral) sentiment shares.
#[derive(Clone, Debug, Default)]
pub struct EmojiSentimentTable {
    scores: HashMap<String, [f64; 3]>,
}

impl EmojiSentimentTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, emoji: &str, scores: [f64; 3]) -> Result<(), LexiconError> {
        if scores.iter().any(|s| !s.is_finite() || *s < 0.0) || (scores.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(LexiconError::Invalid(format!(
                "emoji {emoji}: scores {scores:?} must be nonnegative and sum to 1"
            )));
        }
        self.scores.insert(emoji_key(emoji), scores);
        Ok(())
    }

    /// CSV with an optional `emoji,...` header line.
    pub fn parse(contents: &str, source_name: &str) -> Result<Self, LexiconError> {
        let mut table = Self::new();
        for (line, l) in data_lines(contents) {
            let err = |reason: String| LexiconError::Parse {
                source_name: source_name.to_owned(),
                line,
                reason,
            };
            if line == 1 && l.to_ascii_lowercase().starts_with("emoji,") {
                continue;
            }
            let fields: Vec<&str> = l.rsplitn(4, ',').collect();
            if fields.len() != 4 {
                return Err(err("expected `emoji,pos,neg,neutral`".into()));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| err(format!("`{s}`: {e}")));
            let scores = [num(fields[2])?, num(fields[1])?, num(fields[0])?];
            table
                .insert(fields[3].trim(), scores)
                .map_err(|e| err(e.to_string()))?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        Self::parse(&read(path)?, &path.display().to_string())
    }

    pub fn lookup(&self, emoji: &str) -> Option<[f64; 3]> {
        self.scores
            .get(&emoji_key(emoji))
            .or_else(|| self.scores.get(&emoji_base_key(emoji)))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EmojiSentiment {
    /// Mean (positive, negative, neutral) over recognised emoji.
    pub scores: [f64; 3],
    pub matched: usize,
    /// Emoji found in the text but missing from the table.
    pub unknown: usize,
}

/// Mean sentiment triple of the emoji in raw (uncleaned) text.
pub fn emoji_sentiment(raw_text: &str, table: &EmojiSentimentTable) -> EmojiSentiment {
    let mut out = EmojiSentiment::default();
    for g in emoji_graphemes(raw_text) {
        match table.lookup(g) {
            Some(s) => {
                out.matched += 1;
                for (acc, v) in out.scores.iter_mut().zip(s) {
                    *acc += v;
                }
            }
            None => out.unknown += 1,
        }
    }
    if out.matched > 0 {
        let n = out.matched as f64;
        out.scores.iter_mut().for_each(|s| *s /= n);
    }
    out
}

pub const DEPRESSION_CATEGORY: &str = "depression_terms";

/// Ordered named word sets. The depression keyword category always comes
/// last.
#[derive(Clone, Debug)]
pub struct CategoryLexicon {
    names: Vec<String>,
    index: HashMap<String, Vec<usize>>,
}

impl CategoryLexicon {
    pub fn new(general: Vec<(String, Vec<String>)>, depression_terms: Vec<String>) -> Result<Self, LexiconError> {
        let mut names = Vec::with_capacity(general.len() + 1);
        let mut index: HashMap<String, Vec<usize>> = HashMap::new();
        let mut seen = HashSet::new();
        let all = general
            .into_iter()
            .chain(std::iter::once((DEPRESSION_CATEGORY.to_owned(), depression_terms)));
        for (i, (name, words)) in all.enumerate() {
            if !seen.insert(name.clone()) {
                return Err(LexiconError::Invalid(format!("duplicate category `{name}`")));
            }
            let words: HashSet<String> = words
                .iter()
                .map(|w| w.trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect();
            if words.is_empty() {
                return Err(LexiconError::Invalid(format!("category `{name}` has no words")));
            }
            for w in words {
                index.entry(w).or_default().push(i);
            }
            names.push(name);
        }
        Ok(Self { names, index })
    }

    /// Parses `category<TAB>word` lines; first appearance orders categories.
    pub fn parse_tsv(contents: &str, source_name: &str) -> Result<Vec<(String, Vec<String>)>, LexiconError> {
        let mut order: Vec<(String, Vec<String>)> = Vec::new();
        let mut pos: HashMap<String, usize> = HashMap::new();
        for (line, l) in data_lines(contents) {
            let (cat, word) = l.split_once('\t').ok_or_else(|| LexiconError::Parse {
                source_name: source_name.to_owned(),
                line,
                reason: "expected `category<TAB>word`".into(),
            })?;
            let cat = cat.trim();
            let i = *pos.entry(cat.to_owned()).or_insert_with(|| {
                order.push((cat.to_owned(), Vec::new()));
                order.len() - 1
            });
            order[i].1.push(word.trim().to_owned());
        }
        Ok(order)
    }

    pub fn parse_word_list(contents: &str) -> Vec<String> {
        data_lines(contents).map(|(_, l)| l.trim().to_owned()).collect()
    }

    /// Loads general categories from a TSV file or a directory of per-category
    /// word lists, then appends the depression keyword list.
    pub fn load(categories: &Path, depression_terms: &Path) -> Result<Self, LexiconError> {
        let general = if categories.is_dir() {
            let mut files: Vec<_> = fs::read_dir(categories)
                .map_err(|source| LexiconError::Io {
                    path: categories.display().to_string(),
                    source,
                })?
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| p.is_file())
                .collect();
            files.sort();
            files
                .iter()
                .map(|p| {
                    let name = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                    Ok((name, Self::parse_word_list(&read(p)?)))
                })
                .collect::<Result<Vec<_>, LexiconError>>()?
        } else {
            Self::parse_tsv(&read(categories)?, &categories.display().to_string())?
        };
        Self::new(general, Self::parse_word_list(&read(depression_terms)?))
    }

    /// Number of categories including the depression category.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn general_len(&self) -> usize {
        self.names.len() - 1
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn categories_of(&self, word: &str) -> &[usize] {
        self.index.get(word).map_or(&[], Vec::as_slice)
    }
}

/// Per-category share of tokens in that category; the last component is the
/// depression category. A token in several categories counts for each.
pub fn category_counts(text: &str, lex: &CategoryLexicon) -> Vec<f64> {
    category_counts_with(text, lex, Normalization::Frequency)
}

pub fn category_counts_with(text: &str, lex: &CategoryLexicon, norm: Normalization) -> Vec<f64> {
    let mut counts = vec![0.0; lex.len()];
    let mut tokens = 0;
    for tok in text.split_whitespace() {
        tokens += 1;
        let cats = match lex.categories_of(tok) {
            [] => lex.categories_of(&tok.to_lowercase()).to_vec(),
            found => found.to_vec(),
        };
        for c in cats {
            counts[c] += 1.0;
        }
    }
    norm.apply(&mut counts, tokens);
    counts
}

/// Splits a category vector into the general categories and the trailing
/// depression score.
pub fn split_depression(v: &[f64]) -> (Vec<f64>, f64) {
    match v.split_last() {
        Some((last, rest)) => (rest.to_vec(), *last),
        None => (Vec::new(), 0.0),
    }
}

/// Name and content hash of a loaded lexicon file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconSource {
    pub name: String,
    pub origin: String,
    pub sha256: String,
}

impl LexiconSource {
    fn new(name: &str, origin: impl Into<String>, contents: &[u8]) -> Self {
        Self {
            name: name.to_owned(),
            origin: origin.into(),
            sha256: hex::encode(Sha256::digest(contents)),
        }
    }
}

/// Paths of the five lexicon files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconPaths {
    pub stopwords: std::path::PathBuf,
    pub emotion: std::path::PathBuf,
    pub emoji: std::path::PathBuf,
    pub categories: std::path::PathBuf,
    pub depression_terms: std::path::PathBuf,
}

/// Every lexicon the feature extractor needs, plus their fingerprints.
#[derive(Clone, Debug)]
pub struct Lexicons {
    pub stopwords: Stopwords,
    pub emotion: EmotionLexicon,
    pub emoji: EmojiSentimentTable,
    pub categories: CategoryLexicon,
    pub sources: Vec<LexiconSource>,
}

const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords.txt");
const BUNDLED_EMOTION: &str = include_str!("../data/emotion_lexicon.tsv");
const BUNDLED_EMOJI: &str = include_str!("../data/emoji_sentiment.csv");
const BUNDLED_CATEGORIES: &str = include_str!("../data/categories.tsv");
const BUNDLED_DEPRESSION: &str = include_str!("../data/depression_terms.txt");

impl Lexicons {
    /// The lexicons compiled into the library.
    pub fn bundled() -> Self {
        let general = CategoryLexicon::parse_tsv(BUNDLED_CATEGORIES, "bundled categories").expect("bundled categories parse");
        let categories = CategoryLexicon::new(general, CategoryLexicon::parse_word_list(BUNDLED_DEPRESSION))
            .expect("bundled categories are valid");
        Self {
            stopwords: Stopwords::parse(BUNDLED_STOPWORDS),
            emotion: EmotionLexicon::parse(BUNDLED_EMOTION, "bundled emotion lexicon").expect("bundled emotion lexicon parses"),
            emoji: EmojiSentimentTable::parse(BUNDLED_EMOJI, "bundled emoji table").expect("bundled emoji table parses"),
            categories,
            sources: vec![
                LexiconSource::new("stopwords", "bundled", BUNDLED_STOPWORDS.as_bytes()),
                LexiconSource::new("emotion", "bundled", BUNDLED_EMOTION.as_bytes()),
                LexiconSource::new("emoji", "bundled", BUNDLED_EMOJI.as_bytes()),
                LexiconSource::new("categories", "bundled", BUNDLED_CATEGORIES.as_bytes()),
                LexiconSource::new("depression_terms", "bundled", BUNDLED_DEPRESSION.as_bytes()),
            ],
        }
    }

    pub fn load(paths: &LexiconPaths) -> Result<Self, LexiconError> {
        let stop = read(&paths.stopwords)?;
        let emotion = read(&paths.emotion)?;
        let emoji = read(&paths.emoji)?;
        let depression = read(&paths.depression_terms)?;
        let categories = CategoryLexicon::load(&paths.categories, &paths.depression_terms)?;
        let categories_hash = if paths.categories.is_dir() {
            let mut h = Sha256::new();
            let mut files: Vec<_> = fs::read_dir(&paths.categories)
                .map_err(|source| LexiconError::Io {
                    path: paths.categories.display().to_string(),
                    source,
                })?
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| p.is_file())
                .collect();
            files.sort();
            for f in files {
                h.update(f.file_name().unwrap_or_default().to_string_lossy().as_bytes());
                h.update(read(&f)?.as_bytes());
            }
            h.finalize().to_vec()
        } else {
            read(&paths.categories)?.into_bytes()
        };
        let origin = |p: &Path| p.display().to_string();
        Ok(Self {
            stopwords: Stopwords::parse(&stop),
            emotion: EmotionLexicon::parse(&emotion, &origin(&paths.emotion))?,
            emoji: EmojiSentimentTable::parse(&emoji, &origin(&paths.emoji))?,
            categories,
            sources: vec![
                LexiconSource::new("stopwords", origin(&paths.stopwords), stop.as_bytes()),
                LexiconSource::new("emotion", origin(&paths.emotion), emotion.as_bytes()),
                LexiconSource::new("emoji", origin(&paths.emoji), emoji.as_bytes()),
                LexiconSource::new("categories", origin(&paths.categories), &categories_hash),
                LexiconSource::new("depression_terms", origin(&paths.depression_terms), depression.as_bytes()),
            ],
        })
    }
}
