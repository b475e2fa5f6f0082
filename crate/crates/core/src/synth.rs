//! Synthetic corpora with a known class difference, for end-to-end checks
//! at small scale.

use chrono::{Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledDataset, ProfileInfo, TweetRecord, UserRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub users: usize,
    pub tweets_per_user: usize,
    pub words_per_tweet: usize,
    /// Share of words drawn from the depression vocabulary in depressed
    /// users' tweets.
    pub keyword_rate: f64,
    /// Same share for control users.
    pub background_keyword_rate: f64,
    /// When false both classes write from the same distribution.
    pub text_signal: bool,
    /// When true depressed users' image embeddings are shifted by
    /// `+embedding_shift` and controls' by `-embedding_shift` in every dim.
    pub visual_signal: bool,
    pub embedding_dim: usize,
    pub embedding_shift: f64,
    /// Chance that a tweet after the first carries an image; the first
    /// tweet always does.
    pub image_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            users: 200,
            tweets_per_user: 10,
            words_per_tweet: 12,
            keyword_rate: 0.25,
            background_keyword_rate: 0.03,
            text_signal: true,
            visual_signal: true,
            embedding_dim: 128,
            embedding_shift: 0.5,
            image_rate: 0.3,
            seed: 7,
        }
    }
}

const DEPRESSED_WORDS: &[&str] = &[
    "depressed", "depression", "hopeless", "worthless", "lonely", "alone", "tired", "exhausted", "empty", "numb",
    "anxiety", "anxious", "panic", "insomnia", "crying", "cry", "tears", "sad", "sadness", "pain", "hurt",
    "suicidal", "therapy", "therapist", "antidepressants", "meds", "overwhelmed", "miserable", "broken", "darkness",
];

const NEUTRAL_WORDS: &[&str] = &[
    "coffee", "morning", "train", "office", "meeting", "lunch", "football", "match", "weekend", "movie", "music",
    "album", "concert", "garden", "weather", "sunny", "rain", "pizza", "dinner", "recipe", "cake", "holiday",
    "beach", "city", "museum", "book", "chapter", "podcast", "episode", "game", "score", "team", "coach",
    "market", "price", "phone", "laptop", "update", "project", "deadline", "email", "road", "traffic", "bike",
    "park", "dog", "cat", "walk", "run", "gym", "friends", "party", "birthday", "photo", "camera", "trip",
    "flight", "hotel", "street", "shop", "news", "election", "science", "space", "river", "mountain", "snow",
    "autumn", "spring", "summer", "winter", "tea", "bread", "cheese", "soup", "salad", "kitchen", "paint",
    "guitar", "piano", "song", "dance", "class", "lecture", "exam", "library", "school", "bus", "ticket",
];

const DESCRIPTIONS: &[&str] = &[
    "",
    "coffee lover and weekend runner",
    "music, books and long walks",
    "student of life",
    "opinions are my own",
    "dog person",
];

fn words(rng: &mut ChaCha8Rng, n: usize, keyword_rate: f64) -> String {
    (0..n)
        .map(|_| {
            if rng.gen::<f64>() < keyword_rate {
                *DEPRESSED_WORDS.choose(rng).expect("nonempty")
            } else {
                *NEUTRAL_WORDS.choose(rng).expect("nonempty")
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Generates a balanced corpus; even-numbered users are depressed.
pub fn planted_corpus(cfg: &SynthConfig) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = Utc.with_ymd_and_hms(2020, 3, 1, 0, 0, 0).unwrap();
    let users = (0..cfg.users)
        .map(|i| {
            let depressed = i % 2 == 0;
            let rate = if cfg.text_signal && depressed {
                cfg.keyword_rate
            } else {
                cfg.background_keyword_rate
            };
            let shift = match (cfg.visual_signal, depressed) {
                (false, _) => 0.0,
                (true, true) => cfg.embedding_shift,
                (true, false) => -cfg.embedding_shift,
            };
            let tweets = (0..cfg.tweets_per_user)
                .map(|j| {
                    let image_embeddings = if j == 0 || rng.gen::<f64>() < cfg.image_rate {
                        vec![(0..cfg.embedding_dim).map(|_| shift + rng.gen_range(-1.0..1.0)).collect()]
                    } else {
                        Vec::new()
                    };
                    TweetRecord {
                        tweet_id: format!("s{i:03}-{j:02}"),
                        timestamp: start + Duration::hours((i * cfg.tweets_per_user + j) as i64),
                        text: words(&mut rng, cfg.words_per_tweet, rate),
                        urls: Vec::new(),
                        ocr_text: None,
                        image_embeddings,
                    }
                })
                .collect();
            UserRecord {
                user_id: format!("s{i:03}"),
                label: u8::from(depressed),
                profile: ProfileInfo {
                    followers_count: rng.gen_range(10..2000),
                    friends_count: rng.gen_range(10..1000),
                    favourites_count: rng.gen_range(0..5000),
                    statuses_count: rng.gen_range(50..20000),
                    description: DESCRIPTIONS.choose(&mut rng).expect("nonempty").to_string(),
                },
                tweets,
            }
        })
        .collect();
    LabeledDataset::new(users, "planted-signal").expect("generated users are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_shape() {
        let ds = planted_corpus(&SynthConfig::default());
        assert_eq!(ds.users.len(), 200);
        assert_eq!(ds.class_counts(), (100, 100));
        assert!(ds.users.iter().all(|u| u.tweets[0].image_embeddings.len() == 1));
        assert_eq!(ds.to_jsonl(), planted_corpus(&SynthConfig::default()).to_jsonl());
    }

    #[test]
    fn keywords_concentrate_in_depressed_users() {
        let ds = planted_corpus(&SynthConfig::default());
        let rate = |label: u8| {
            let (mut hit, mut all) = (0, 0);
            for u in ds.users.iter().filter(|u| u.label == label) {
                for w in u.tweets.iter().flat_map(|t| t.text.split_whitespace()) {
                    all += 1;
                    hit += usize::from(DEPRESSED_WORDS.contains(&w));
                }
            }
            hit as f64 / all as f64
        };
        assert!(rate(1) > 0.2 && rate(0) < 0.05);
    }
}
