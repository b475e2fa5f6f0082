//! Turns raw user records into cleaned, augmented, filtered text ready for
//! feature extraction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{clean_text, is_mostly_non_latin, LabeledDataset, Stopwords, UserRecord};
use crate::webcontext::{augment_tweet, UrlTitleCache};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepareOptions {
    /// Tweets need strictly more cleaned tokens than this to survive.
    pub min_words: usize,
    /// Drop tweets whose letters are mostly outside basic Latin.
    pub language_filter: bool,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self {
            min_words: 5,
            language_filter: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreparedTweet {
    /// Tweet text with URL titles and OCR text appended, before cleaning.
    pub raw: String,
    pub clean: String,
}

#[derive(Clone, Debug)]
pub struct PreparedUser {
    /// The record as loaded, with every original tweet.
    pub record: UserRecord,
    /// Surviving tweets only.
    pub tweets: Vec<PreparedTweet>,
    pub description_clean: String,
}

impl PreparedUser {
    pub fn is_emptied(&self) -> bool {
        self.tweets.is_empty()
    }

    /// Cleaned tokens of all surviving tweets, in tweet order.
    pub fn tokens(&self) -> Vec<&str> {
        self.tweets.iter().flat_map(|t| t.clean.split_whitespace()).collect()
    }
}

pub fn prepare_user(user: &UserRecord, titles: &UrlTitleCache, stopwords: &Stopwords, opts: &PrepareOptions) -> PreparedUser {
    let tweets = user
        .tweets
        .iter()
        .filter_map(|t| {
            let found: Vec<String> = t
                .all_urls()
                .iter()
                .filter_map(|u| titles.title(u).map(str::to_owned))
                .collect();
            let raw = augment_tweet(t, &found).text;
            if opts.language_filter && is_mostly_non_latin(&raw) {
                return None;
            }
            let clean = clean_text(&raw, stopwords);
            (clean.split_whitespace().count() > opts.min_words).then_some(PreparedTweet { raw, clean })
        })
        .collect();
    PreparedUser {
        record: user.clone(),
        tweets,
        description_clean: clean_text(&user.profile.description, stopwords),
    }
}

pub fn prepare_dataset(
    ds: &LabeledDataset,
    titles: &UrlTitleCache,
    stopwords: &Stopwords,
    opts: &PrepareOptions,
) -> Vec<PreparedUser> {
    ds.users
        .par_iter()
        .map(|u| prepare_user(u, titles, stopwords, opts))
        .collect()
}
