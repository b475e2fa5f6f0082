//! Latent Dirichlet Allocation trained by collapsed Gibbs sampling.
//!
//! Document–topic probabilities follow
//! `phi[t] = (m[t] + alpha) / (sum_i m[i] + T * alpha)` and term–topic
//! probabilities `gamma[t][w] = (n[t][w] + eta) / (n_t[t] + W * eta)`, where
//! `m` counts the tokens of one document assigned to each topic and `n`
//! counts term/topic assignments over the training corpus.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TopicError {
    #[error("corpus has no tokens")]
    EmptyCorpus,
    #[error("vocabulary of {words} words is smaller than {topics} topics")]
    DegenerateVocabulary { words: usize, topics: usize },
    #[error("invalid LDA parameter: {0}")]
    InvalidParameter(String),
    #[error("topic {index} out of range for {topics} topics")]
    IndexOutOfRange { index: usize, topics: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaParams {
    pub topics: usize,
    pub alpha: f64,
    pub eta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaParams {
    /// Conventional collapsed-Gibbs settings for `topics` topics:
    /// `alpha = 50 / T`, `eta = 0.01`, 500 sweeps.
    pub fn with_topics(topics: usize) -> Self {
        Self {
            topics,
            alpha: 50.0 / topics as f64,
            eta: 0.01,
            iterations: 500,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<(), TopicError> {
        if self.topics < 2 {
            return Err(TopicError::InvalidParameter(format!("need at least 2 topics, got {}", self.topics)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) || !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(TopicError::InvalidParameter(format!(
                "alpha ({}) and eta ({}) must be positive",
                self.alpha, self.eta
            )));
        }
        if self.iterations == 0 {
            return Err(TopicError::InvalidParameter("iterations must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for LdaParams {
    fn default() -> Self {
        Self::with_topics(15)
    }
}

/// Word list with a reverse index. Serialised as the plain list.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_words(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Self { words, index }
    }

    fn intern(&mut self, word: &str) -> usize {
        if let Some(&i) = self.index.get(word) {
            return i;
        }
        self.words.push(word.to_owned());
        self.index.insert(word.to_owned(), self.words.len() - 1);
        self.words.len() - 1
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.words.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Self::from_words(Vec::deserialize(d)?))
    }
}

/// A trained topic model: term/topic counts and smoothing constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub topics: usize,
    pub alpha: f64,
    pub eta: f64,
    pub vocab: Vocabulary,
    /// `T x W` assignment counts.
    pub counts: Vec<Vec<u32>>,
    pub topic_totals: Vec<u64>,
    /// SHA-256 over the training documents.
    pub trained_on: String,
    pub seed: u64,
    pub iterations: usize,
}

/// Document–topic distribution from per-topic counts of one document.
/// All-zero counts give the uniform distribution.
pub fn doc_topic_from_counts(counts: &[u32], alpha: f64) -> Vec<f64> {
    let topics = counts.len() as f64;
    let total: f64 = counts.iter().map(|&c| f64::from(c)).sum();
    let denom = total + topics * alpha;
    counts.iter().map(|&c| (f64::from(c) + alpha) / denom).collect()
}

fn corpus_fingerprint(corpus: &[Vec<String>]) -> String {
    let mut h = Sha256::new();
    for doc in corpus {
        for tok in doc {
            h.update(tok.as_bytes());
            h.update([0u8]);
        }
        h.update([1u8]);
    }
    hex::encode(h.finalize())
}

/// Collapsed Gibbs sampler state. [`fit_lda`] drives it to completion;
/// holding it directly allows inspecting the counts between sweeps.
#[derive(Clone)]
pub struct GibbsSampler {
    params: LdaParams,
    vocab: Vocabulary,
    docs: Vec<Vec<usize>>,
    assignments: Vec<Vec<usize>>,
    doc_topic: Vec<Vec<u32>>,
    topic_word: Vec<Vec<u32>>,
    topic_totals: Vec<u64>,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
    sweeps: usize,
    fingerprint: String,
}

impl GibbsSampler {
    pub fn new(corpus: &[Vec<String>], params: LdaParams) -> Result<Self, TopicError> {
        params.validate()?;
        let mut vocab = Vocabulary::default();
        let docs: Vec<Vec<usize>> = corpus
            .iter()
            .map(|d| d.iter().map(|w| vocab.intern(w)).collect())
            .collect();
        if docs.iter().all(Vec::is_empty) {
            return Err(TopicError::EmptyCorpus);
        }
        if vocab.len() < params.topics {
            return Err(TopicError::DegenerateVocabulary {
                words: vocab.len(),
                topics: params.topics,
            });
        }

        let t = params.topics;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut doc_topic = vec![vec![0u32; t]; docs.len()];
        let mut topic_word = vec![vec![0u32; vocab.len()]; t];
        let mut topic_totals = vec![0u64; t];
        let assignments = docs
            .iter()
            .enumerate()
            .map(|(d, doc)| {
                doc.iter()
                    .map(|&w| {
                        let z = rng.gen_range(0..t);
                        doc_topic[d][z] += 1;
                        topic_word[z][w] += 1;
                        topic_totals[z] += 1;
                        z
                    })
                    .collect()
            })
            .collect();

        Ok(Self {
            fingerprint: corpus_fingerprint(corpus),
            weights: vec![0.0; t],
            params,
            vocab,
            docs,
            assignments,
            doc_topic,
            topic_word,
            topic_totals,
            rng,
            sweeps: 0,
        })
    }

    /// Resamples every token's topic once.
    pub fn sweep(&mut self) {
        let t = self.params.topics;
        let (alpha, eta) = (self.params.alpha, self.params.eta);
        let w_eta = self.vocab.len() as f64 * eta;
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i];
                let old = self.assignments[d][i];
                self.doc_topic[d][old] -= 1;
                self.topic_word[old][w] -= 1;
                self.topic_totals[old] -= 1;

                let mut total = 0.0;
                for k in 0..t {
                    total += (f64::from(self.doc_topic[d][k]) + alpha) * (f64::from(self.topic_word[k][w]) + eta)
                        / (self.topic_totals[k] as f64 + w_eta);
                    self.weights[k] = total;
                }
                let u = self.rng.gen::<f64>() * total;
                let new = self.weights.iter().position(|&c| u < c).unwrap_or(t - 1);

                self.assignments[d][i] = new;
                self.doc_topic[d][new] += 1;
                self.topic_word[new][w] += 1;
                self.topic_totals[new] += 1;
            }
        }
        self.sweeps += 1;
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Token → topic assignments per document.
    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.assignments
    }

    pub fn doc_topic_counts(&self) -> &[Vec<u32>] {
        &self.doc_topic
    }

    pub fn topic_word_counts(&self) -> &[Vec<u32>] {
        &self.topic_word
    }

    pub fn topic_totals(&self) -> &[u64] {
        &self.topic_totals
    }

    pub fn total_tokens(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    /// Topic distribution of training document `d` under the current state.
    pub fn doc_topic_dist(&self, d: usize) -> Vec<f64> {
        doc_topic_from_counts(&self.doc_topic[d], self.params.alpha)
    }

    /// The model as it stands after the sweeps run so far.
    pub fn snapshot(&self) -> TopicModel {
        self.clone().into_model()
    }

    pub fn into_model(self) -> TopicModel {
        TopicModel {
            topics: self.params.topics,
            alpha: self.params.alpha,
            eta: self.params.eta,
            vocab: self.vocab,
            counts: self.topic_word,
            topic_totals: self.topic_totals,
            trained_on: self.fingerprint,
            seed: self.params.seed,
            iterations: self.sweeps,
        }
    }
}

/// Fits a topic model with `params.iterations` Gibbs sweeps. Deterministic
/// for a given seed.
pub fn fit_lda(corpus: &[Vec<String>], params: &LdaParams) -> Result<TopicModel, TopicError> {
    let mut sampler = GibbsSampler::new(corpus, params.clone())?;
    for _ in 0..params.iterations {
        sampler.sweep();
    }
    Ok(sampler.into_model())
}

impl TopicModel {
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Folds a new document into the frozen model and returns its topic
    /// distribution. Unknown tokens are skipped; a document with no known
    /// tokens gets the uniform distribution.
    pub fn doc_topic_dist<S: AsRef<str>>(&self, doc: &[S], fold_iterations: usize, seed: u64) -> Vec<f64> {
        let t = self.topics;
        let words: Vec<usize> = doc.iter().filter_map(|w| self.vocab.id(w.as_ref())).collect();
        let mut m = vec![0u32; t];
        if words.is_empty() {
            return doc_topic_from_counts(&m, self.alpha);
        }

        let w_eta = self.vocab.len() as f64 * self.eta;
        // Term likelihood per (word, topic) never changes during fold-in.
        let likelihood = |w: usize, k: usize| {
            (f64::from(self.counts[k][w]) + self.eta) / (self.topic_totals[k] as f64 + w_eta)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z: Vec<usize> = words
            .iter()
            .map(|_| {
                let k = rng.gen_range(0..t);
                m[k] += 1;
                k
            })
            .collect();
        let mut cumulative = vec![0.0; t];
        for _ in 0..fold_iterations {
            for (i, &w) in words.iter().enumerate() {
                m[z[i]] -= 1;
                let mut total = 0.0;
                for k in 0..t {
                    total += (f64::from(m[k]) + self.alpha) * likelihood(w, k);
                    cumulative[k] = total;
                }
                let u = rng.gen::<f64>() * total;
                let k = cumulative.iter().position(|&c| u < c).unwrap_or(t - 1);
                z[i] = k;
                m[k] += 1;
            }
        }
        doc_topic_from_counts(&m, self.alpha)
    }

    /// `T x W` term–topic probabilities; each row sums to one.
    pub fn term_topic_dist(&self) -> Vec<Vec<f64>> {
        let w_eta = self.vocab.len() as f64 * self.eta;
        self.counts
            .iter()
            .zip(&self.topic_totals)
            .map(|(row, &total)| {
                let denom = total as f64 + w_eta;
                row.iter().map(|&n| (f64::from(n) + self.eta) / denom).collect()
            })
            .collect()
    }

    /// The `k` most probable words of `topic`, ties broken by vocabulary order.
    pub fn top_words(&self, topic: usize, k: usize) -> Result<Vec<&str>, TopicError> {
        let row = self.counts.get(topic).ok_or(TopicError::IndexOutOfRange {
            index: topic,
            topics: self.topics,
        })?;
        let mut ids: Vec<usize> = (0..row.len()).collect();
        // Within a topic the probability is monotone in the count.
        ids.sort_by(|&a, &b| row[b].cmp(&row[a]).then(a.cmp(&b)));
        Ok(ids.into_iter().take(k).map(|i| self.vocab.word(i)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn docs(texts: &[&str]) -> Vec<Vec<String>> {
        texts
            .iter()
            .map(|t| t.split_whitespace().map(str::to_owned).collect())
            .collect()
    }

    fn model_with_counts(counts: Vec<Vec<u32>>, eta: f64, words: &[&str]) -> TopicModel {
        let topic_totals = counts.iter().map(|r| r.iter().map(|&c| u64::from(c)).sum()).collect();
        TopicModel {
            topics: counts.len(),
            alpha: 1.0,
            eta,
            vocab: Vocabulary::from_words(words.iter().map(|w| w.to_string()).collect()),
            counts,
            topic_totals,
            trained_on: String::new(),
            seed: 0,
            iterations: 0,
        }
    }

    #[test]
    fn eq1_on_minimal_counts() {
        let phi = doc_topic_from_counts(&[1, 0], 1.0);
        assert_abs_diff_eq!(phi[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(phi[1], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(doc_topic_from_counts(&[0, 0, 0, 0], 0.3), vec![0.25; 4]);
    }

    #[test]
    fn eq2_on_hand_counts() {
        let m = model_with_counts(vec![vec![2, 0], vec![0, 2]], 1.0, &["a", "b"]);
        let g = m.term_topic_dist();
        assert_abs_diff_eq!(g[0][0], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(g[0][1], 0.25, epsilon = 1e-15);
        let zero = model_with_counts(vec![vec![0; 4]; 3], 0.01, &["a", "b", "c", "d"]);
        for row in zero.term_topic_dist() {
            for p in row {
                assert_abs_diff_eq!(p, 0.25, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn top_words_clamp_and_ties() {
        let m = model_with_counts(vec![vec![1, 3, 3, 0], vec![0, 0, 0, 5]], 0.01, &["a", "b", "c", "d"]);
        assert_eq!(m.top_words(0, 2).unwrap(), vec!["b", "c"]);
        assert!(m.top_words(0, 0).unwrap().is_empty());
        assert_eq!(m.top_words(1, 10).unwrap().len(), 4);
        assert_eq!(m.top_words(1, 10).unwrap()[0], "d");
        assert!(matches!(m.top_words(2, 1), Err(TopicError::IndexOutOfRange { .. })));
    }

    #[test]
    fn fit_rejects_bad_inputs() {
        let p = LdaParams::with_topics(2);
        assert_eq!(fit_lda(&[], &p).unwrap_err(), TopicError::EmptyCorpus);
        assert_eq!(fit_lda(&docs(&[""]), &p).unwrap_err(), TopicError::EmptyCorpus);
        assert!(matches!(fit_lda(&docs(&["w"]), &p), Err(TopicError::DegenerateVocabulary { .. })));
        let one_topic = LdaParams::with_topics(1);
        assert!(matches!(fit_lda(&docs(&["a b"]), &one_topic), Err(TopicError::InvalidParameter(_))));
        let zero_iter = LdaParams { iterations: 0, ..p.clone() };
        assert!(matches!(fit_lda(&docs(&["a b"]), &zero_iter), Err(TopicError::InvalidParameter(_))));
    }

    #[test]
    fn same_seed_same_model_and_round_trip() {
        let corpus = docs(&["a b c a b", "c d e d e", "a e b d"]);
        let p = LdaParams {
            iterations: 20,
            seed: 9,
            ..LdaParams::with_topics(2)
        };
        let a = fit_lda(&corpus, &p).unwrap();
        let b = fit_lda(&corpus, &p).unwrap();
        assert_eq!(a, b);
        let json = serde_json::to_string(&a).unwrap();
        let back: TopicModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.vocab.id("d"), a.vocab.id("d"));
    }

    #[test]
    fn empty_or_unknown_doc_folds_to_uniform() {
        let corpus = docs(&["a b c a b", "c d e d e"]);
        let m = fit_lda(&corpus, &LdaParams { iterations: 5, ..LdaParams::with_topics(3) }).unwrap();
        let empty: [&str; 0] = [];
        for phi in [m.doc_topic_dist(&empty, 10, 1), m.doc_topic_dist(&["zzz"], 10, 1)] {
            for p in &phi {
                assert_abs_diff_eq!(*p, 1.0 / 3.0, epsilon = 1e-15);
            }
        }
        let phi = m.doc_topic_dist(&["a", "b", "zzz"], 10, 1);
        assert_abs_diff_eq!(phi.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }
}
