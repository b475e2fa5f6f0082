//! Webpage titles behind tweeted URLs.
//!
//! Titles are resolved once per distinct URL and kept in a persistent
//! [`UrlTitleCache`]. Resolved titles and any OCR text are appended to the
//! tweet before cleaning so the textual features see them.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::io::Read;
use std::path::Path;
use std::sync::{Mutex, OnceLock};
use std::time::Duration;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TweetRecord;

#[derive(Debug, Error)]
pub enum WebError {
    #[error("offline mode: `{0}` is not in the title cache")]
    OfflineCacheMiss(String),
    #[error("title cache {path}: {reason}")]
    Cache { path: String, reason: String },
}

fn url_run() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)https?://[A-Za-z0-9\-._~:/?#\[\]@!$&'()*+,;=%]+").unwrap()
    })
}

/// All http(s) URLs in `text`, in order of appearance, duplicates included.
/// Trailing sentence punctuation is not considered part of a URL.
pub fn extract_urls(text: &str) -> Vec<String> {
    url_run()
        .find_iter(text)
        .map(|m| m.as_str().trim_end_matches(['.', ',', ';', ':', '!', '?', '\'']))
        .filter(|u| u.len() > u.find("://").map_or(0, |i| i + 3))
        .map(str::to_owned)
        .collect()
}

fn title_element() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?is)<title\b[^>]*>(.*?)(?:</title\s*>|<|$)").unwrap())
}

fn meta_tag() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?is)<meta\b([^>]*)>").unwrap())
}

fn attribute() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?s)([A-Za-z_:][-A-Za-z0-9_:.]*)\s*=\s*(?:"([^"]*)"|'([^']*)'|([^\s"'>/]+))"#)
            .unwrap()
    })
}

fn decode_entities(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let tail = &rest[amp..];
        let decoded = tail.find(';').filter(|&end| end <= 10).and_then(|end| {
            let name = &tail[1..end];
            let c = match name {
                "amp" => Some('&'),
                "lt" => Some('<'),
                "gt" => Some('>'),
                "quot" => Some('"'),
                "apos" => Some('\''),
                "nbsp" => Some(' '),
                _ if name.starts_with("#x") || name.starts_with("#X") => {
                    u32::from_str_radix(&name[2..], 16).ok().and_then(char::from_u32)
                }
                _ if name.starts_with('#') => name[1..].parse().ok().and_then(char::from_u32),
                _ => None,
            };
            c.map(|c| (c, end + 1))
        });
        match decoded {
            Some((c, len)) => {
                out.push(c);
                rest = &tail[len..];
            }
            None => {
                out.push('&');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Text of the first `<title>` element, whitespace-collapsed, falling back to
/// the `og:title` meta property. Malformed markup is handled best-effort.
pub fn html_title(document: &[u8]) -> Option<String> {
    let html = String::from_utf8_lossy(document);
    if let Some(cap) = title_element().captures(&html) {
        let title = collapse_whitespace(&decode_entities(&cap[1]));
        if !title.is_empty() {
            return Some(title);
        }
    }
    for tag in meta_tag().captures_iter(&html) {
        let mut is_og_title = false;
        let mut content = None;
        for attr in attribute().captures_iter(&tag[1]) {
            let value = attr
                .get(2)
                .or_else(|| attr.get(3))
                .or_else(|| attr.get(4))
                .map_or("", |m| m.as_str());
            match attr[1].to_ascii_lowercase().as_str() {
                "property" | "name" if value.eq_ignore_ascii_case("og:title") => is_og_title = true,
                "content" => content = Some(value),
                _ => {}
            }
        }
        if is_og_title {
            let title = collapse_whitespace(&decode_entities(content.unwrap_or("")));
            if !title.is_empty() {
                return Some(title);
            }
        }
    }
    None
}

/// Returns a copy of `t` with each title and then any OCR text appended,
/// separated by single spaces.
pub fn augment_tweet(t: &TweetRecord, titles: &[String]) -> TweetRecord {
    let mut text = t.text.clone();
    let extras = titles
        .iter()
        .map(String::as_str)
        .chain(t.ocr_text.as_deref())
        .filter(|s| !s.trim().is_empty());
    for extra in extras {
        text.push(' ');
        text.push_str(extra);
    }
    TweetRecord { text, ..t.clone() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FetchStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub title: Option<String>,
    pub fetched_at: DateTime<Utc>,
    pub status: FetchStatus,
}

/// URL → title map persisted as a JSON object.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UrlTitleCache {
    entries: BTreeMap<String, CacheEntry>,
}

impl UrlTitleCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("cache serialises");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self, WebError> {
        let err = |reason: String| WebError::Cache {
            path: path.display().to_string(),
            reason,
        };
        let json = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        Self::from_json(&json).map_err(|e| err(e.to_string()))
    }

    /// Like [`load`](Self::load) but a missing file yields an empty cache.
    pub fn load_or_default(path: &Path) -> Result<Self, WebError> {
        if path.exists() {
            Self::load(path)
        } else {
            Ok(Self::default())
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), WebError> {
        fs::write(path, self.to_json()).map_err(|e| WebError::Cache {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    pub fn get(&self, url: &str) -> Option<&CacheEntry> {
        self.entries.get(url)
    }

    pub fn insert(&mut self, url: impl Into<String>, entry: CacheEntry) {
        self.entries.insert(url.into(), entry);
    }

    /// The cached title for `url`, if it was fetched successfully.
    pub fn title(&self, url: &str) -> Option<&str> {
        self.entries
            .get(url)
            .filter(|e| e.status == FetchStatus::Ok)
            .and_then(|e| e.title.as_deref())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &CacheEntry)> {
        self.entries.iter()
    }
}

/// Limits for online title resolution. At most one request per host is in
/// flight at any time.
#[derive(Clone, Debug, PartialEq)]
pub struct FetchPolicy {
    pub offline: bool,
    pub timeout: Duration,
    pub max_redirects: u32,
    pub max_body_bytes: usize,
    pub max_concurrency: usize,
    /// A failed URL is not retried until this much time has passed.
    pub retry_failed_after: chrono::Duration,
    pub max_title_chars: usize,
}

impl Default for FetchPolicy {
    fn default() -> Self {
        Self {
            offline: false,
            timeout: Duration::from_secs(10),
            max_redirects: 5,
            max_body_bytes: 1 << 20,
            max_concurrency: 8,
            retry_failed_after: chrono::Duration::days(7),
            max_title_chars: 300,
        }
    }
}

impl FetchPolicy {
    pub fn offline() -> Self {
        Self {
            offline: true,
            ..Self::default()
        }
    }
}

/// Source of raw page bytes. Implementations must honour the policy's
/// timeout, redirect and body-size limits.
pub trait PageFetcher: Send + Sync {
    fn fetch(&self, url: &str, policy: &FetchPolicy) -> Result<Vec<u8>, String>;
}

/// Blocking HTTP fetcher.
pub struct HttpFetcher {
    agent: ureq::Agent,
}

impl HttpFetcher {
    pub fn new(policy: &FetchPolicy) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(policy.timeout)
            .redirects(policy.max_redirects)
            .user_agent(concat!("mfel/", env!("CARGO_PKG_VERSION")))
            .build();
        Self { agent }
    }
}

impl PageFetcher for HttpFetcher {
    fn fetch(&self, url: &str, policy: &FetchPolicy) -> Result<Vec<u8>, String> {
        let resp = self.agent.get(url).call().map_err(|e| e.to_string())?;
        let mut body = Vec::new();
        resp.into_reader()
            .take(policy.max_body_bytes as u64)
            .read_to_end(&mut body)
            .map_err(|e| e.to_string())?;
        Ok(body)
    }
}

enum Plan {
    Cached(Option<String>),
    Fetch,
}

fn plan(
    url: &str,
    cache: &UrlTitleCache,
    policy: &FetchPolicy,
    now: DateTime<Utc>,
) -> Result<Plan, WebError> {
    match cache.get(url) {
        Some(e) if e.status == FetchStatus::Ok => Ok(Plan::Cached(e.title.clone())),
        Some(e) if e.status == FetchStatus::Skipped => Ok(Plan::Cached(None)),
        Some(e) => {
            let cooling = now - e.fetched_at < policy.retry_failed_after;
            if cooling || policy.offline {
                Ok(Plan::Cached(None))
            } else {
                Ok(Plan::Fetch)
            }
        }
        None if policy.offline => Err(WebError::OfflineCacheMiss(url.to_owned())),
        None => Ok(Plan::Fetch),
    }
}

fn truncate_chars(s: String, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => s[..i].to_owned(),
        None => s,
    }
}

fn resolve(url: &str, policy: &FetchPolicy, fetcher: &dyn PageFetcher, now: DateTime<Utc>) -> CacheEntry {
    let scheme_ok = url::Url::parse(url)
        .map(|u| matches!(u.scheme(), "http" | "https"))
        .unwrap_or(false);
    if !scheme_ok {
        return CacheEntry {
            title: None,
            fetched_at: now,
            status: FetchStatus::Skipped,
        };
    }
    let title = match fetcher.fetch(url, policy) {
        Ok(body) => html_title(&body).map(|t| truncate_chars(t, policy.max_title_chars)),
        Err(reason) => {
            log::debug!("fetch {url} failed: {reason}");
            None
        }
    };
    CacheEntry {
        status: if title.is_some() {
            FetchStatus::Ok
        } else {
            FetchStatus::Failed
        },
        title,
        fetched_at: now,
    }
}

/// Title for `url`, from the cache when possible. On a miss in online mode a
/// single request is made and its outcome, success or failure, is cached.
pub fn fetch_title(
    url: &str,
    cache: &mut UrlTitleCache,
    policy: &FetchPolicy,
    fetcher: &dyn PageFetcher,
    now: DateTime<Utc>,
) -> Result<Option<String>, WebError> {
    match plan(url, cache, policy, now)? {
        Plan::Cached(title) => Ok(title),
        Plan::Fetch => {
            let entry = resolve(url, policy, fetcher, now);
            let title = entry.title.clone();
            cache.insert(url, entry);
            Ok(title)
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FetchSummary {
    pub distinct_urls: usize,
    pub cache_hits: usize,
    pub fetched: usize,
    pub failed: usize,
    pub offline_misses: Vec<String>,
}

fn host_of(url: &str) -> String {
    url::Url::parse(url)
        .ok()
        .and_then(|u| u.host_str().map(str::to_owned))
        .unwrap_or_default()
}

/// Resolves every distinct URL in `urls` once. Hosts are spread across up to
/// `policy.max_concurrency` workers and each host's URLs are fetched one
/// after another. In offline mode misses are collected, never fetched.
pub fn fetch_all<'a, I>(
    urls: I,
    cache: &mut UrlTitleCache,
    policy: &FetchPolicy,
    fetcher: &dyn PageFetcher,
    now: DateTime<Utc>,
) -> FetchSummary
where
    I: IntoIterator<Item = &'a str>,
{
    let distinct: BTreeSet<&str> = urls.into_iter().collect();
    let mut summary = FetchSummary {
        distinct_urls: distinct.len(),
        ..FetchSummary::default()
    };

    let mut by_host: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    for &url in &distinct {
        match plan(url, cache, policy, now) {
            Ok(Plan::Cached(_)) => summary.cache_hits += 1,
            Ok(Plan::Fetch) => by_host.entry(host_of(url)).or_default().push(url),
            Err(_) => summary.offline_misses.push(url.to_owned()),
        }
    }
    if by_host.is_empty() {
        return summary;
    }

    let queue: Mutex<VecDeque<Vec<&str>>> = Mutex::new(by_host.into_values().collect());
    let results: Mutex<Vec<(String, CacheEntry)>> = Mutex::new(Vec::new());
    let workers = policy.max_concurrency.max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let Some(host_urls) = queue.lock().unwrap().pop_front() else {
                    break;
                };
                for url in host_urls {
                    let entry = resolve(url, policy, fetcher, now);
                    results.lock().unwrap().push((url.to_owned(), entry));
                }
            });
        }
    });

    for (url, entry) in results.into_inner().unwrap() {
        summary.fetched += 1;
        if entry.status != FetchStatus::Ok {
            summary.failed += 1;
        }
        cache.insert(url, entry);
    }
    summary
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct StubFetcher {
        calls: AtomicUsize,
        body: &'static str,
    }

    impl StubFetcher {
        fn new(body: &'static str) -> Self {
            Self {
                calls: AtomicUsize::new(0),
                body,
            }
        }
    }

    impl PageFetcher for StubFetcher {
        fn fetch(&self, _url: &str, _policy: &FetchPolicy) -> Result<Vec<u8>, String> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(self.body.as_bytes().to_vec())
        }
    }

    fn now() -> DateTime<Utc> {
        "2024-06-02T00:00:00Z".parse().unwrap()
    }

    #[test]
    fn extracts_urls_in_order() {
        assert_eq!(
            extract_urls("see https://x.y/a and http://z.w"),
            vec!["https://x.y/a", "http://z.w"]
        );
        assert!(extract_urls("no links here").is_empty());
        assert_eq!(extract_urls("https://a https://a").len(), 2);
        assert_eq!(extract_urls("read https://x.y/a."), vec!["https://x.y/a"]);
        assert!(extract_urls("https:// nothing").is_empty());
    }

    #[test]
    fn title_extraction() {
        assert_eq!(html_title(b"<html><head><title> A  B </title>").as_deref(), Some("A B"));
        assert_eq!(
            html_title(br#"<head><meta property="og:title" content="X"></head>"#).as_deref(),
            Some("X")
        );
        assert_eq!(
            html_title(br#"<meta content='Y &amp; Z' name="og:title"/>"#).as_deref(),
            Some("Y & Z")
        );
        assert_eq!(html_title(b""), None);
        assert_eq!(html_title(b"<title>   </title>"), None);
        assert_eq!(html_title(b"<TITLE>Caps &#8211; dash"), Some("Caps \u{2013} dash".into()));
    }

    #[test]
    fn augment_appends_titles_then_ocr() {
        let t = TweetRecord {
            tweet_id: "1".into(),
            timestamp: now(),
            text: "sad day".into(),
            urls: vec![],
            ocr_text: None,
            image_embeddings: vec![],
        };
        let out = augment_tweet(&t, &["Self-harm alternatives - Stay strong".into()]);
        assert_eq!(out.text, "sad day Self-harm alternatives - Stay strong");
        assert_eq!(t.text, "sad day");
        assert_eq!(augment_tweet(&t, &[]), t);
        let with_ocr = TweetRecord {
            ocr_text: Some("you are not alone".into()),
            ..t.clone()
        };
        assert_eq!(augment_tweet(&with_ocr, &[]).text, "sad day you are not alone");
    }

    #[test]
    fn offline_miss_is_an_error_and_never_fetches() {
        let fetcher = StubFetcher::new("<title>T</title>");
        let mut cache = UrlTitleCache::new();
        let err = fetch_title("https://a.b", &mut cache, &FetchPolicy::offline(), &fetcher, now());
        assert!(matches!(err, Err(WebError::OfflineCacheMiss(_))));
        assert_eq!(fetcher.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn online_miss_fetches_once_then_hits_cache() {
        let fetcher = StubFetcher::new("<title>Anxiety UK</title>");
        let mut cache = UrlTitleCache::new();
        let policy = FetchPolicy::default();
        for _ in 0..3 {
            let t = fetch_title("https://a.b", &mut cache, &policy, &fetcher, now()).unwrap();
            assert_eq!(t.as_deref(), Some("Anxiety UK"));
        }
        assert_eq!(fetcher.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn missing_title_is_cached_as_failed_and_respects_cooldown() {
        let fetcher = StubFetcher::new("<html><body>nothing</body></html>");
        let mut cache = UrlTitleCache::new();
        let policy = FetchPolicy::default();
        assert_eq!(fetch_title("https://a.b", &mut cache, &policy, &fetcher, now()).unwrap(), None);
        assert_eq!(cache.get("https://a.b").unwrap().status, FetchStatus::Failed);
        let soon = now() + chrono::Duration::days(1);
        fetch_title("https://a.b", &mut cache, &policy, &fetcher, soon).unwrap();
        assert_eq!(fetcher.calls.load(Ordering::SeqCst), 1);
        let later = now() + chrono::Duration::days(8);
        fetch_title("https://a.b", &mut cache, &policy, &fetcher, later).unwrap();
        assert_eq!(fetcher.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn long_titles_are_truncated() {
        let fetcher = StubFetcher::new(Box::leak(format!("<title>{}</title>", "é".repeat(400)).into_boxed_str()));
        let mut cache = UrlTitleCache::new();
        let t = fetch_title("https://a.b", &mut cache, &FetchPolicy::default(), &fetcher, now())
            .unwrap()
            .unwrap();
        assert_eq!(t.chars().count(), 300);
    }

    #[test]
    fn fetch_all_dedups_and_is_idempotent() {
        let fetcher = StubFetcher::new("<title>T</title>");
        let mut cache = UrlTitleCache::new();
        let urls = ["https://a.b/1", "https://a.b/1", "https://c.d/2", "https://e.f/3"];
        let policy = FetchPolicy::default();
        let first = fetch_all(urls.iter().copied(), &mut cache, &policy, &fetcher, now());
        assert_eq!(first.distinct_urls, 3);
        assert_eq!(first.fetched, 3);
        let second = fetch_all(urls.iter().copied(), &mut cache, &policy, &fetcher, now());
        assert_eq!(second.fetched, 0);
        assert_eq!(second.cache_hits, 3);
        assert_eq!(fetcher.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn cache_round_trips() {
        let mut cache = UrlTitleCache::new();
        cache.insert(
            "https://a.b",
            CacheEntry {
                title: Some("Ti\"tle".into()),
                fetched_at: now(),
                status: FetchStatus::Ok,
            },
        );
        cache.insert(
            "https://c.d",
            CacheEntry {
                title: None,
                fetched_at: now(),
                status: FetchStatus::Failed,
            },
        );
        let back = UrlTitleCache::from_json(&cache.to_json()).unwrap();
        assert_eq!(back, cache);
    }
}
