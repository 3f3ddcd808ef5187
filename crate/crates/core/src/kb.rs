//! People-Also-Ask style knowledge-base lookups.
//!
//! A question/answer pair is turned into up to four search queries. Each
//! query is answered live (through a [`PaaSource`], rate limited and retried,
//! with every response appended to a JSON Lines cache) or replayed from that
//! same cache format. Retrieved questions are then filtered for relevance.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::thread;
use std::time::{Duration, Instant};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ranker::{similarity, Embedder};
use crate::remote::{HttpClient, RemoteError};
use crate::text::{content_words, fold, normalize, AnswerKey, ObjectiveQuestion};

#[derive(Debug, Error)]
pub enum KbError {
    #[error("knowledge base unavailable: {0}")]
    Unavailable(String),
    #[error("no replay fixture for query {0:?}")]
    MissingFixture(String),
    #[error("knowledge base is switched off")]
    Disabled,
    #[error("cache {path}: {message}")]
    Cache { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Permutation {
    #[serde(rename = "Q_A")]
    QuestionAnswer,
    #[serde(rename = "A_Q")]
    AnswerQuestion,
    #[serde(rename = "Q_ONLY")]
    QuestionOnly,
    #[serde(rename = "KEYPHRASE_A")]
    KeyphraseAnswer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchQuery {
    pub text: String,
    pub permutation: Permutation,
}

/// Cache/replay key for a query string.
pub fn query_key(text: &str) -> String {
    fold(&normalize(text))
}

/// Search queries in fixed order: Q+A, A+Q, Q alone, Q's content words +
/// A. With an empty answer only the Q-only and Q-content variants remain.
/// Queries equal after normalization are emitted once.
pub fn build_queries(question: &ObjectiveQuestion, answer: &AnswerKey) -> Vec<SearchQuery> {
    let q = question.normalized();
    let a = answer.normalized();
    let keyphrase = content_words(&q).join(" ");
    let mut raw = Vec::with_capacity(4);
    if answer.is_empty() {
        raw.push((q.clone(), Permutation::QuestionOnly));
        raw.push((keyphrase, Permutation::KeyphraseAnswer));
    } else {
        raw.push((format!("{q} {a}"), Permutation::QuestionAnswer));
        raw.push((format!("{a} {q}"), Permutation::AnswerQuestion));
        raw.push((q.clone(), Permutation::QuestionOnly));
        raw.push((format!("{keyphrase} {a}"), Permutation::KeyphraseAnswer));
    }
    let mut seen = HashSet::new();
    raw.into_iter()
        .map(|(text, permutation)| (normalize(&text), permutation))
        .filter(|(text, _)| !text.is_empty() && seen.insert(query_key(text)))
        .map(|(text, permutation)| SearchQuery { text, permutation })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KbMode {
    Live,
    Replay,
    #[default]
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KbSource {
    Live,
    Replay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KbResult {
    pub query: SearchQuery,
    pub questions: Vec<String>,
    pub fetched_at: DateTime<Utc>,
    pub source: KbSource,
}

/// One line of the cache / replay fixture file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub query: String,
    pub questions: Vec<String>,
    pub fetched_at: DateTime<Utc>,
}

/// In-memory view of one or more cache files; later records for the same
/// query replace earlier ones.
#[derive(Debug, Default)]
pub struct ReplayStore {
    records: HashMap<String, CacheRecord>,
}

impl ReplayStore {
    pub fn insert(&mut self, record: CacheRecord) {
        self.records.insert(query_key(&record.query), record);
    }

    pub fn get(&self, query: &str) -> Option<&CacheRecord> {
        self.records.get(&query_key(query))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Loads a JSON Lines cache file. Blank lines are skipped.
    pub fn load_file(&mut self, path: &Path) -> Result<(), KbError> {
        let cache_err = |message: String| KbError::Cache {
            path: path.display().to_string(),
            message,
        };
        let file = File::open(path).map_err(|e| cache_err(e.to_string()))?;
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| cache_err(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: CacheRecord = serde_json::from_str(&line)
                .map_err(|e| cache_err(format!("line {}: {e}", n + 1)))?;
            self.insert(record);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceError {
    RateLimited,
    Unavailable(String),
}

/// A live question source.
pub trait PaaSource: Send + Sync {
    fn fetch(&self, query: &str) -> Result<Vec<String>, SourceError>;
}

/// Live settings for an HTTP search API returning related questions as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpSourceConfig {
    pub endpoint: crate::remote::EndpointConfig,
    /// Query parameter receiving the search text.
    pub query_param: String,
    /// Extra fixed query parameters (engine, locale, ...).
    pub extra_params: Vec<(String, String)>,
    /// JSON pointer to the array of related questions.
    pub questions_pointer: String,
    /// Field holding the question text inside each array element; when
    /// empty the elements are plain strings.
    pub question_field: String,
}

impl Default for HttpSourceConfig {
    fn default() -> Self {
        Self {
            endpoint: Default::default(),
            query_param: "q".into(),
            extra_params: Vec::new(),
            questions_pointer: "/related_questions".into(),
            question_field: "question".into(),
        }
    }
}

pub struct HttpPaaSource {
    client: HttpClient,
    config: HttpSourceConfig,
}

impl HttpPaaSource {
    pub fn new(config: HttpSourceConfig) -> Result<Self, RemoteError> {
        Ok(Self {
            client: HttpClient::new(config.endpoint.clone())?,
            config,
        })
    }
}

/// Pulls question strings out of a search response.
pub fn extract_questions(body: &serde_json::Value, pointer: &str, field: &str) -> Vec<String> {
    let Some(items) = body.pointer(pointer).and_then(|v| v.as_array()) else {
        return Vec::new();
    };
    items
        .iter()
        .filter_map(|item| {
            if field.is_empty() {
                item.as_str()
            } else {
                item.get(field).and_then(|v| v.as_str())
            }
        })
        .map(normalize)
        .filter(|s| !s.is_empty())
        .collect()
}

impl PaaSource for HttpPaaSource {
    fn fetch(&self, query: &str) -> Result<Vec<String>, SourceError> {
        let mut params: Vec<(&str, &str)> = vec![(&self.config.query_param, query)];
        params.extend(self.config.extra_params.iter().map(|(k, v)| (k.as_str(), v.as_str())));
        match self.client.get_json::<serde_json::Value>(&params) {
            Ok(body) => Ok(extract_questions(
                &body,
                &self.config.questions_pointer,
                &self.config.question_field,
            )),
            Err(RemoteError::RateLimited) => Err(SourceError::RateLimited),
            Err(e) => Err(SourceError::Unavailable(e.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RateLimit {
    pub min_interval_ms: u64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
}

impl Default for RateLimit {
    fn default() -> Self {
        Self {
            min_interval_ms: 2_000,
            max_retries: 3,
            backoff_base_ms: 1_000,
        }
    }
}

struct LiveFetcher {
    source: Box<dyn PaaSource>,
    rate: RateLimit,
    last_request: Mutex<Option<Instant>>,
    cache: Option<(PathBuf, Mutex<File>)>,
}

impl LiveFetcher {
    fn fetch(&self, query: &str) -> Result<Vec<String>, KbError> {
        // One request at a time, spaced by the configured interval.
        let mut last = self.last_request.lock().expect("rate gate poisoned");
        let interval = Duration::from_millis(self.rate.min_interval_ms);
        let mut attempt = 0;
        loop {
            if let Some(prev) = *last {
                let elapsed = prev.elapsed();
                if elapsed < interval {
                    thread::sleep(interval - elapsed);
                }
            }
            *last = Some(Instant::now());
            match self.source.fetch(query) {
                Ok(questions) => return Ok(questions),
                Err(SourceError::RateLimited) if attempt < self.rate.max_retries => {
                    let backoff = self.rate.backoff_base_ms.saturating_mul(1 << attempt.min(16));
                    log::warn!("rate limited on {query:?}; retrying in {backoff} ms");
                    thread::sleep(Duration::from_millis(backoff));
                    attempt += 1;
                }
                Err(SourceError::RateLimited) => {
                    return Err(KbError::Unavailable(format!(
                        "rate limited after {} retries",
                        self.rate.max_retries
                    )))
                }
                Err(SourceError::Unavailable(msg)) => return Err(KbError::Unavailable(msg)),
            }
        }
    }

    fn record(&self, record: &CacheRecord) -> Result<(), KbError> {
        let Some((path, file)) = &self.cache else {
            return Ok(());
        };
        let line = serde_json::to_string(record).expect("cache record serializes");
        let mut f = file.lock().expect("cache writer poisoned");
        writeln!(f, "{line}").map_err(|e| KbError::Cache {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

pub const DEFAULT_LIMIT: usize = 4;

/// Knowledge-base client in one of three modes.
pub struct KbClient {
    mode: KbMode,
    limit: usize,
    replay: RwLock<ReplayStore>,
    live: Option<LiveFetcher>,
}

impl KbClient {
    pub fn off() -> Self {
        Self {
            mode: KbMode::Off,
            limit: DEFAULT_LIMIT,
            replay: RwLock::new(ReplayStore::default()),
            live: None,
        }
    }

    pub fn replay(store: ReplayStore, limit: usize) -> Self {
        Self {
            mode: KbMode::Replay,
            limit: limit.max(1),
            replay: RwLock::new(store),
            live: None,
        }
    }

    /// Live client; every response is appended to `cache_path` when given.
    pub fn live(
        source: Box<dyn PaaSource>,
        rate: RateLimit,
        limit: usize,
        cache_path: Option<&Path>,
    ) -> Result<Self, KbError> {
        let cache = match cache_path {
            Some(path) => {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir).map_err(|e| KbError::Cache {
                        path: dir.display().to_string(),
                        message: e.to_string(),
                    })?;
                }
                let file = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| KbError::Cache {
                        path: path.display().to_string(),
                        message: e.to_string(),
                    })?;
                Some((path.to_path_buf(), Mutex::new(file)))
            }
            None => None,
        };
        Ok(Self {
            mode: KbMode::Live,
            limit: limit.max(1),
            replay: RwLock::new(ReplayStore::default()),
            live: Some(LiveFetcher {
                source,
                rate,
                last_request: Mutex::new(None),
                cache,
            }),
        })
    }

    pub fn mode(&self) -> KbMode {
        self.mode
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn fetch(&self, query: &SearchQuery) -> Result<KbResult, KbError> {
        match self.mode {
            KbMode::Off => Err(KbError::Disabled),
            KbMode::Replay => {
                let store = self.replay.read().expect("replay store poisoned");
                let record = store
                    .get(&query.text)
                    .ok_or_else(|| KbError::MissingFixture(query.text.clone()))?;
                Ok(KbResult {
                    query: query.clone(),
                    questions: record.questions.iter().take(self.limit).cloned().collect(),
                    fetched_at: record.fetched_at,
                    source: KbSource::Replay,
                })
            }
            KbMode::Live => {
                let live = self.live.as_ref().ok_or(KbError::Disabled)?;
                let questions = live.fetch(&query.text)?;
                let now = Utc::now();
                let fetched_at = DateTime::parse_from_rfc3339(&now.to_rfc3339_opts(SecondsFormat::Secs, true))
                    .map(|d| d.with_timezone(&Utc))
                    .unwrap_or(now);
                let record = CacheRecord {
                    query: query.text.clone(),
                    questions,
                    fetched_at,
                };
                live.record(&record)?;
                let questions = record.questions.iter().take(self.limit).cloned().collect();
                self.replay.write().expect("replay store poisoned").insert(record);
                Ok(KbResult {
                    query: query.clone(),
                    questions,
                    fetched_at,
                    source: KbSource::Live,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub lexical_floor: f64,
    pub semantic_floor: f64,
    /// Terms marking questions about the source site rather than the topic.
    pub site_terms: Vec<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            lexical_floor: 0.3,
            semantic_floor: 0.4,
            site_terms: ["google", "website", "wikipedia", "quora", "brainly"]
                .map(String::from)
                .to_vec(),
        }
    }
}

/// Fraction of the candidate's distinct content words found in `reference`.
pub fn lexical_overlap(candidate: &str, reference: &HashSet<String>) -> f64 {
    let words: HashSet<String> = content_words(candidate).into_iter().collect();
    if words.is_empty() {
        return 0.0;
    }
    words.intersection(reference).count() as f64 / words.len() as f64
}

/// Keeps candidates relevant to the pair, in input order.
///
/// A candidate survives when its content-word overlap with Q and A reaches
/// `lexical_floor`, its similarity to `Q A` reaches `semantic_floor`, it
/// mentions at least one content word of a non-empty answer, and it is not
/// about the source site. If the embedder fails the semantic test is skipped.
pub fn filter_candidates(
    candidates: &[String],
    question: &ObjectiveQuestion,
    answer: &AnswerKey,
    config: &FilterConfig,
    embedder: &dyn Embedder,
) -> Vec<String> {
    let answer_words: HashSet<String> = content_words(&answer.normalized()).into_iter().collect();
    let mut reference: HashSet<String> = content_words(&question.normalized()).into_iter().collect();
    reference.extend(answer_words.iter().cloned());
    let pair_text = normalize(&format!("{} {}", question.normalized(), answer.normalized()));
    let site_terms: Vec<String> = config
        .site_terms
        .iter()
        .map(|t| fold(t))
        .filter(|t| !reference.contains(t))
        .collect();

    candidates
        .iter()
        .filter(|c| {
            let words: HashSet<String> = content_words(c).into_iter().collect();
            if words.iter().any(|w| site_terms.contains(w)) {
                return false;
            }
            if !answer_words.is_empty() && words.is_disjoint(&answer_words) {
                return false;
            }
            if lexical_overlap(c, &reference) < config.lexical_floor {
                return false;
            }
            match similarity(c, &pair_text, embedder) {
                Ok(s) => s >= config.semantic_floor,
                Err(e) => {
                    log::warn!("semantic filter skipped: {e}");
                    true
                }
            }
        })
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranker::HashingEmbedder;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    const DESERT_Q: &str = "desert plants have scale/spine-like leaves to";
    const DESERT_A: &str = "reduce the loss of water by transpiration";
    const DESERT_PAA: &str =
        "How are the desert plants adapted to reduce the loss of water by transpiration?";

    fn pair(q: &str, a: &str) -> (ObjectiveQuestion, AnswerKey) {
        (ObjectiveQuestion::new("t", q), AnswerKey::new(a))
    }

    #[test]
    fn queries_in_fixed_order() {
        let (q, a) = pair(DESERT_Q, DESERT_A);
        let qs = build_queries(&q, &a);
        assert_eq!(qs.len(), 4);
        assert_eq!(
            qs[0].text,
            "desert plants have scale/spine-like leaves to reduce the loss of water by transpiration"
        );
        assert_eq!(qs[0].permutation, Permutation::QuestionAnswer);
        assert_eq!(qs[1].permutation, Permutation::AnswerQuestion);
        assert_eq!(qs[2].text, DESERT_Q);
        assert_eq!(
            qs[3].text,
            "desert plants scale/spine-like leaves reduce the loss of water by transpiration"
        );
    }

    #[test]
    fn empty_answer_queries() {
        let (q, a) = pair("X is", "");
        let qs = build_queries(&q, &a);
        assert_eq!(qs.len(), 2);
        assert_eq!(qs[0], SearchQuery { text: "X is".into(), permutation: Permutation::QuestionOnly });
        assert_eq!(qs[1].permutation, Permutation::KeyphraseAnswer);
        assert_eq!(qs[1].text, "x");
    }

    #[test]
    fn identical_pair_is_deduplicated() {
        let (q, a) = pair("photosynthesis", "photosynthesis");
        let qs = build_queries(&q, &a);
        // Q_A == A_Q and KEYPHRASE_A == Q_A
        assert_eq!(qs.len(), 2);
        assert!(qs.len() < 4);
    }

    fn desert_store() -> ReplayStore {
        let mut store = ReplayStore::default();
        store.insert(CacheRecord {
            query: "Desert plants have scale/spine-like leaves to reduce the loss of water by transpiration".into(),
            questions: vec![
                DESERT_PAA.into(),
                "Why do desert plants have spines?".into(),
                "What is transpiration?".into(),
                "How do cacti store water?".into(),
                "What is a xerophyte?".into(),
            ],
            fetched_at: "2022-03-01T10:00:00Z".parse().unwrap(),
        });
        store
    }

    #[test]
    fn replay_fetch_respects_limit_and_is_case_insensitive() {
        let client = KbClient::replay(desert_store(), DEFAULT_LIMIT);
        let (q, a) = pair(DESERT_Q, DESERT_A);
        let query = &build_queries(&q, &a)[0];
        let r = client.fetch(query).unwrap();
        assert_eq!(r.questions.len(), 4);
        assert_eq!(r.questions[0], DESERT_PAA);
        assert_eq!(r.source, KbSource::Replay);
        assert_eq!(client.fetch(query).unwrap(), r);
    }

    #[test]
    fn replay_without_fixture_is_unavailable() {
        let client = KbClient::replay(ReplayStore::default(), 4);
        let q = SearchQuery { text: "nothing".into(), permutation: Permutation::QuestionOnly };
        assert!(matches!(client.fetch(&q), Err(KbError::MissingFixture(_))));
        assert!(matches!(KbClient::off().fetch(&q), Err(KbError::Disabled)));
    }

    struct Flaky {
        failures: usize,
        calls: Arc<AtomicUsize>,
    }

    impl PaaSource for Flaky {
        fn fetch(&self, query: &str) -> Result<Vec<String>, SourceError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(SourceError::RateLimited)
            } else {
                Ok(vec![format!("What is {query}?"); 6])
            }
        }
    }

    fn quick_rate(max_retries: u32) -> RateLimit {
        RateLimit { min_interval_ms: 1, max_retries, backoff_base_ms: 1 }
    }

    #[test]
    fn live_retries_then_caches() {
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("kb/cache.jsonl");
        let calls = Arc::new(AtomicUsize::new(0));
        let client = KbClient::live(
            Box::new(Flaky { failures: 2, calls: calls.clone() }),
            quick_rate(3),
            4,
            Some(&cache),
        )
        .unwrap();
        let q = SearchQuery { text: "osmosis".into(), permutation: Permutation::QuestionOnly };
        let r = client.fetch(&q).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 3);
        assert_eq!(r.questions.len(), 4);
        assert_eq!(r.source, KbSource::Live);

        // the cache doubles as a replay fixture
        let mut store = ReplayStore::default();
        store.load_file(&cache).unwrap();
        let replayed = KbClient::replay(store, 4).fetch(&q).unwrap();
        assert_eq!(replayed.questions, r.questions);
        assert_eq!(replayed.fetched_at, r.fetched_at);
    }

    #[test]
    fn live_gives_up_after_retry_cap() {
        let calls = Arc::new(AtomicUsize::new(0));
        let client = KbClient::live(
            Box::new(Flaky { failures: 10, calls: calls.clone() }),
            quick_rate(2),
            4,
            None,
        )
        .unwrap();
        let q = SearchQuery { text: "osmosis".into(), permutation: Permutation::QuestionOnly };
        assert!(matches!(client.fetch(&q), Err(KbError::Unavailable(_))));
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn desert_paa_question_survives_default_floors() {
        let (q, a) = pair(DESERT_Q, DESERT_A);
        let reference: HashSet<String> = content_words(&format!("{DESERT_Q} {DESERT_A}")).into_iter().collect();
        // desert plants reduce loss water transpiration shared; "adapted" is not
        assert!((lexical_overlap(DESERT_PAA, &reference) - 6.0 / 7.0).abs() < 1e-12);
        let kept = filter_candidates(
            &[DESERT_PAA.to_string()],
            &q,
            &a,
            &FilterConfig::default(),
            &HashingEmbedder::default(),
        );
        assert_eq!(kept, [DESERT_PAA]);
    }

    #[test]
    fn filter_drops_irrelevant_and_site_questions() {
        let (q, a) = pair(DESERT_Q, DESERT_A);
        let cands: Vec<String> = [
            "Who won the football world cup?",
            "Is Google the best website for transpiration facts?",
            "Why do desert plants have spines?",
            DESERT_PAA,
        ]
        .map(String::from)
        .to_vec();
        let kept = filter_candidates(&cands, &q, &a, &FilterConfig::default(), &HashingEmbedder::default());
        assert_eq!(kept, [DESERT_PAA]);
        assert!(filter_candidates(&[], &q, &a, &FilterConfig::default(), &HashingEmbedder::default()).is_empty());
    }

    #[test]
    fn extracts_questions_from_search_json() {
        let body = serde_json::json!({
            "related_questions": [
                {"question": "What is   osmosis?"},
                {"snippet": "no question"},
                {"question": ""}
            ]
        });
        assert_eq!(extract_questions(&body, "/related_questions", "question"), ["What is osmosis?"]);
        let plain = serde_json::json!({"qs": ["A?", "B?"]});
        assert_eq!(extract_questions(&plain, "/qs", ""), ["A?", "B?"]);
        assert!(extract_questions(&plain, "/missing", "").is_empty());
    }
}
