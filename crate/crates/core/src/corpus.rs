//! Dataset schema, loading, text cleaning and corpus statistics.
//!
//! A dataset file holds one JSON object per line, one line per user:
//!
//! ```text
//! {"user_id": "...", "label": 0|1,
//!  "profile": {"followers_count": n, "friends_count": n, "favourites_count": n,
//!              "statuses_count": n, "description": "..."},
//!  "tweets": [{"tweet_id": "...", "timestamp": "<RFC 3339>", "text": "...",
//!              "urls": ["..."], "ocr_text": "...", "image_embeddings": [[...]]}]}
//! ```
//!
//! `ocr_text` and `image_embeddings` are optional. Unknown keys are ignored
//! with a warning.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use unicode_segmentation::UnicodeSegmentation;

use crate::text::is_emoji_grapheme;
use crate::webcontext::extract_urls;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("duplicate user id `{0}`")]
    DuplicateUser(String),
    #[error("dataset contains no users")]
    EmptyDataset,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileInfo {
    pub followers_count: u64,
    pub friends_count: u64,
    pub favourites_count: u64,
    pub statuses_count: u64,
    #[serde(default)]
    pub description: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub tweet_id: String,
    pub timestamp: DateTime<Utc>,
    pub text: String,
    #[serde(default)]
    pub urls: Vec<String>,
    /// Text recognised inside the tweet's images, extracted upstream.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocr_text: Option<String>,
    /// Precomputed image embeddings, one per attached image.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub image_embeddings: Vec<Vec<f64>>,
}

impl TweetRecord {
    /// URLs listed on the record followed by any extra ones found in the text.
    pub fn all_urls(&self) -> Vec<String> {
        let mut urls = self.urls.clone();
        for u in extract_urls(&self.text) {
            if !urls.contains(&u) {
                urls.push(u);
            }
        }
        urls
    }

    pub fn has_url(&self) -> bool {
        !self.urls.is_empty() || !extract_urls(&self.text).is_empty()
    }

    pub fn has_image(&self) -> bool {
        !self.image_embeddings.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    /// 1 = depressed, 0 = control.
    pub label: u8,
    pub profile: ProfileInfo,
    #[serde(default)]
    pub tweets: Vec<TweetRecord>,
}

impl UserRecord {
    pub fn is_depressed(&self) -> bool {
        self.label == 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub users: Vec<UserRecord>,
    pub source_name: String,
}

impl LabeledDataset {
    pub fn new(users: Vec<UserRecord>, source_name: impl Into<String>) -> Result<Self, CorpusError> {
        if users.is_empty() {
            return Err(CorpusError::EmptyDataset);
        }
        let mut seen = HashSet::new();
        for u in &users {
            if !seen.insert(u.user_id.as_str()) {
                return Err(CorpusError::DuplicateUser(u.user_id.clone()));
            }
        }
        Ok(Self {
            users,
            source_name: source_name.into(),
        })
    }

    pub fn labels(&self) -> Vec<u8> {
        self.users.iter().map(|u| u.label).collect()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.users.iter().filter(|u| u.is_depressed()).count();
        (self.users.len() - pos, pos)
    }

    pub fn tweet_count(&self) -> usize {
        self.users.iter().map(|u| u.tweets.len()).sum()
    }

    /// Serialises the dataset back to the line-delimited format.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for u in &self.users {
            out.push_str(&serde_json::to_string(u).expect("user records serialise"));
            out.push('\n');
        }
        out
    }
}

const USER_KEYS: &[&str] = &["user_id", "label", "profile", "tweets"];
const PROFILE_KEYS: &[&str] = &[
    "followers_count",
    "friends_count",
    "favourites_count",
    "statuses_count",
    "description",
];
const TWEET_KEYS: &[&str] = &[
    "tweet_id",
    "timestamp",
    "text",
    "urls",
    "ocr_text",
    "image_embeddings",
];

fn warn_unknown_keys(line: usize, value: &Value) {
    fn check(line: usize, what: &str, obj: &Value, known: &[&str]) {
        if let Some(map) = obj.as_object() {
            for key in map.keys().filter(|k| !known.contains(&k.as_str())) {
                log::warn!("line {line}: ignoring unknown {what} key `{key}`");
            }
        }
    }
    check(line, "user", value, USER_KEYS);
    check(line, "profile", &value["profile"], PROFILE_KEYS);
    if let Some(tweets) = value["tweets"].as_array() {
        for t in tweets {
            check(line, "tweet", t, TWEET_KEYS);
        }
    }
}

/// Parses a single dataset line. `line` is 1-based and only used for errors.
pub fn parse_user_line(line: usize, text: &str) -> Result<UserRecord, CorpusError> {
    let parse_err = |reason: String| CorpusError::Parse { line, reason };
    let value: Value = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    warn_unknown_keys(line, &value);
    let user: UserRecord = serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?;
    if user.label > 1 {
        return Err(parse_err(format!("label must be 0 or 1, got {}", user.label)));
    }
    for t in &user.tweets {
        for u in &t.urls {
            if let Err(e) = url::Url::parse(u) {
                return Err(parse_err(format!("tweet {}: invalid url `{u}`: {e}", t.tweet_id)));
            }
        }
        if let Some(first) = t.image_embeddings.first() {
            if first.is_empty() || t.image_embeddings.iter().any(|e| e.len() != first.len()) {
                return Err(parse_err(format!(
                    "tweet {}: image embeddings must share one nonzero dimension",
                    t.tweet_id
                )));
            }
        }
    }
    Ok(user)
}

pub fn parse_dataset(contents: &str, source_name: &str) -> Result<LabeledDataset, CorpusError> {
    let mut users = Vec::new();
    for (i, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        users.push(parse_user_line(i + 1, line)?);
    }
    LabeledDataset::new(users, source_name)
}

pub fn load_dataset(path: &Path) -> Result<LabeledDataset, CorpusError> {
    let contents = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&contents, &path.display().to_string())
}

/// Case-folded stopword set.
#[derive(Clone, Debug, Default)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self(
            words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }

    /// One word per line; blank lines and `#` comments are skipped.
    pub fn parse(contents: &str) -> Self {
        Self::new(
            contents
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn url_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:https?://|www\.)\S+").unwrap())
}

fn mention_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"@\w+").unwrap())
}

/// Normalises raw tweet text: drops URLs and @-mentions, case-folds, turns
/// every character that is not a letter, digit or emoji into a separator,
/// removes stopwords and joins the surviving tokens with single spaces.
///
/// Apostrophes are deleted rather than split on, so `don't` becomes `dont`.
/// Emoji clusters are kept intact as standalone tokens.
pub fn clean_text(raw: &str, stopwords: &Stopwords) -> String {
    let without_urls = url_pattern().replace_all(raw, " ");
    let without_mentions = mention_pattern().replace_all(&without_urls, " ");

    let mut buf = String::with_capacity(without_mentions.len());
    for g in without_mentions.graphemes(true) {
        if is_emoji_grapheme(g) {
            buf.push(' ');
            buf.push_str(g);
            buf.push(' ');
            continue;
        }
        for c in g.chars() {
            if c == '\'' || c == '\u{2019}' {
                continue;
            }
            if c.is_alphanumeric() {
                for lc in c.to_lowercase() {
                    buf.push(if lc.is_alphanumeric() { lc } else { ' ' });
                }
            } else {
                buf.push(' ');
            }
        }
    }

    let mut out = String::with_capacity(buf.len());
    for tok in buf.split_whitespace().filter(|t| !stopwords.contains(t)) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(tok);
    }
    out
}

/// Non-English heuristic: true when more than half of the letters in `text`
/// fall outside basic Latin. Text without letters is never rejected.
pub fn is_mostly_non_latin(text: &str) -> bool {
    let (mut letters, mut foreign) = (0usize, 0usize);
    for c in text.chars().filter(|c| c.is_alphabetic()) {
        letters += 1;
        if !c.is_ascii() {
            foreign += 1;
        }
    }
    letters > 0 && foreign * 2 > letters
}

#[derive(Clone, Debug)]
pub struct FilteredDataset {
    pub dataset: LabeledDataset,
    /// Users whose every tweet was dropped. They stay in the dataset because
    /// their profile features are still usable.
    pub emptied_users: Vec<String>,
}

/// Keeps only tweets with strictly more than `min_words` whitespace tokens.
/// Expects tweet text to be cleaned already.
pub fn filter_tweets(ds: &LabeledDataset, min_words: usize) -> FilteredDataset {
    let mut emptied_users = Vec::new();
    let users = ds
        .users
        .iter()
        .map(|u| {
            let tweets: Vec<TweetRecord> = u
                .tweets
                .iter()
                .filter(|t| t.text.split_whitespace().count() > min_words)
                .cloned()
                .collect();
            if tweets.is_empty() {
                emptied_users.push(u.user_id.clone());
            }
            UserRecord {
                tweets,
                ..u.clone()
            }
        })
        .collect();
    FilteredDataset {
        dataset: LabeledDataset {
            users,
            source_name: ds.source_name.clone(),
        },
        emptied_users,
    }
}

/// URL and image coverage of a dataset at tweet and user level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    pub source_name: String,
    pub users: usize,
    pub tweets: usize,
    pub tweets_with_url: usize,
    pub tweets_with_image: usize,
    pub users_with_url: usize,
    pub users_with_image: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatsRow {
    pub label: &'static str,
    pub percent: f64,
}

fn percent(count: usize, population: usize) -> f64 {
    if population == 0 {
        0.0
    } else {
        100.0 * count as f64 / population as f64
    }
}

impl StatsReport {
    /// The eight rows in with/without pairs: tweets by URL, tweets by image,
    /// users by URL, users by image.
    pub fn rows(&self) -> Vec<StatsRow> {
        let pair = |none: &'static str, some: &'static str, count: usize, pop: usize| {
            [
                StatsRow {
                    label: none,
                    percent: percent(pop - count, pop),
                },
                StatsRow {
                    label: some,
                    percent: percent(count, pop),
                },
            ]
        };
        let mut rows = Vec::with_capacity(8);
        rows.extend(pair(
            "Tweets with no URLs",
            "Tweets with at least one URL",
            self.tweets_with_url,
            self.tweets,
        ));
        rows.extend(pair(
            "Tweets with no images",
            "Tweets with at least one image",
            self.tweets_with_image,
            self.tweets,
        ));
        rows.extend(pair(
            "Users who posted no URLs",
            "Users who posted at least one URL",
            self.users_with_url,
            self.users,
        ));
        rows.extend(pair(
            "Users who posted no images",
            "Users who posted at least one image",
            self.users_with_image,
            self.users,
        ));
        rows
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<40} {:>10}", "Types of Tweets/Users", "Percent")?;
        for row in self.rows() {
            writeln!(f, "{:<40} {:>10.2}", row.label, row.percent)?;
        }
        write!(f, "({} users, {} tweets)", self.users, self.tweets)
    }
}

pub fn dataset_stats(ds: &LabeledDataset) -> StatsReport {
    let mut report = StatsReport {
        source_name: ds.source_name.clone(),
        users: ds.users.len(),
        tweets: 0,
        tweets_with_url: 0,
        tweets_with_image: 0,
        users_with_url: 0,
        users_with_image: 0,
    };
    for u in &ds.users {
        let (mut any_url, mut any_image) = (false, false);
        for t in &u.tweets {
            report.tweets += 1;
            if t.has_url() {
                report.tweets_with_url += 1;
                any_url = true;
            }
            if t.has_image() {
                report.tweets_with_image += 1;
                any_image = true;
            }
        }
        report.users_with_url += usize::from(any_url);
        report.users_with_image += usize::from(any_image);
    }
    report
}
