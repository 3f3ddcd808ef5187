//! Dense-similarity ranking of candidate questions.
//!
//! Embeddings come from an [`Embedder`] backend and are unit-normalized
//! here, so scores are plain dot products in [-1, 1]. Scores are rounded to
//! nine decimals before ordering; ties fall back to provenance
//! (template, knowledge base, neural) and then case-folded text, which makes
//! the order total.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::remote::{HttpClient, RemoteError};
use crate::text::{content_words, fold, normalize, tokenize, words, CandidateSubjectiveQuestion};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("ranking unavailable: {0}")]
    Unavailable(String),
    #[error("embedding has zero norm")]
    ZeroVector,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// Backend contract for sentence embeddings.
pub trait Embedder: Send + Sync {
    fn identity(&self) -> &str;

    fn is_deterministic(&self) -> bool {
        true
    }

    /// Raw, unnormalized vector for non-empty text.
    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, EmbedError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Unit-normalizes `values`.
    pub fn from_raw(values: Vec<f64>) -> Result<Self, EmbedError> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(EmbedError::ZeroVector);
        }
        Ok(Self {
            values: values.into_iter().map(|v| v / norm).collect(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn cosine(&self, other: &Self) -> Result<f64, EmbedError> {
        if self.dimension() != other.dimension() {
            return Err(EmbedError::DimensionMismatch(self.dimension(), other.dimension()));
        }
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(dot.clamp(-1.0, 1.0))
    }
}

pub fn embed(text: &str, backend: &dyn Embedder) -> Result<EmbeddingVector, EmbedError> {
    if normalize(text).is_empty() {
        return Err(EmbedError::EmptyText);
    }
    EmbeddingVector::from_raw(backend.embed_raw(text)?)
}

/// Cosine similarity of two texts under `backend`.
pub fn similarity(a: &str, b: &str, backend: &dyn Embedder) -> Result<f64, EmbedError> {
    embed(a, backend)?.cosine(&embed(b, backend)?)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Bag-of-words feature hashing: each case-folded content word adds one to
/// a hashed coordinate. Texts made only of stopwords hash all their words.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dimension: usize,
}

impl HashingEmbedder {
    pub const DEFAULT_DIMENSION: usize = 1024;

    pub fn new(dimension: usize) -> Self {
        Self {
            dimension: dimension.max(1),
        }
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIMENSION)
    }
}

impl Embedder for HashingEmbedder {
    fn identity(&self) -> &str {
        "hashing-bow"
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let mut features = content_words(text);
        if features.is_empty() {
            let tokens = tokenize(&normalize(text));
            features = words(&tokens).map(fold).collect();
        }
        if features.is_empty() {
            features = vec![fold(&normalize(text))];
        }
        let mut v = vec![0.0; self.dimension];
        for f in features {
            v[(fnv1a(&f) % self.dimension as u64) as usize] += 1.0;
        }
        Ok(v)
    }
}

/// Sums fixed per-token vectors; tokens absent from the table contribute
/// nothing.
#[derive(Debug, Clone, Default)]
pub struct TokenTableEmbedder {
    table: HashMap<String, Vec<f64>>,
    dimension: usize,
}

impl TokenTableEmbedder {
    pub fn new(dimension: usize) -> Self {
        Self {
            table: HashMap::new(),
            dimension,
        }
    }

    pub fn insert(&mut self, token: &str, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dimension, "vector dimension");
        self.table.insert(fold(token), vector);
    }
}

impl Embedder for TokenTableEmbedder {
    fn identity(&self) -> &str {
        "token-table"
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let tokens = tokenize(&normalize(text));
        let mut v = vec![0.0; self.dimension];
        for w in words(&tokens) {
            if let Some(t) = self.table.get(&fold(w)) {
                v.iter_mut().zip(t).for_each(|(a, b)| *a += b);
            }
        }
        Ok(v)
    }
}

/// Calls a feature-extraction endpoint: `POST {"inputs": [text]}` answered by
/// `[[f64, ...]]`.
pub struct HttpEmbedder {
    identity: String,
    client: HttpClient,
    deterministic: bool,
}

impl HttpEmbedder {
    pub fn new(identity: impl Into<String>, client: HttpClient, deterministic: bool) -> Self {
        Self {
            identity: identity.into(),
            client,
            deterministic,
        }
    }
}

impl Embedder for HttpEmbedder {
    fn identity(&self) -> &str {
        &self.identity
    }

    fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let body = serde_json::json!({ "inputs": [text] });
        let unavailable = |e: RemoteError| EmbedError::Unavailable(e.to_string());
        let mut vectors: Vec<Vec<f64>> = self.client.post_json(&body).map_err(unavailable)?;
        vectors
            .pop()
            .ok_or_else(|| EmbedError::Unavailable("empty embedding response".into()))
    }
}

/// Multiplies another backend's raw vectors by a positive constant.
pub struct ScaledEmbedder<E> {
    pub inner: E,
    pub factor: f64,
}

impl<E: Embedder> Embedder for ScaledEmbedder<E> {
    fn identity(&self) -> &str {
        self.inner.identity()
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        Ok(self
            .inner
            .embed_raw(text)?
            .into_iter()
            .map(|v| v * self.factor)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub candidate: CandidateSubjectiveQuestion,
    pub score: f64,
}

const SCORE_SCALE: f64 = 1e9;

fn quantize(score: f64) -> f64 {
    (score * SCORE_SCALE).round() / SCORE_SCALE
}

/// The ranking order: score descending, then provenance priority, then
/// case-folded text, then raw text.
pub fn ranking_order(a: &ScoredCandidate, b: &ScoredCandidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| tie_break(&a.candidate, &b.candidate))
}

fn tie_break(a: &CandidateSubjectiveQuestion, b: &CandidateSubjectiveQuestion) -> Ordering {
    a.provenance
        .priority()
        .cmp(&b.provenance.priority())
        .then_with(|| fold(&a.text).cmp(&fold(&b.text)))
        .then_with(|| a.text.cmp(&b.text))
}

/// Result of a ranking call.
#[derive(Debug, Clone, PartialEq)]
pub enum Ranking {
    Scored(Vec<ScoredCandidate>),
    /// The embedder failed; candidates are in provenance order, unscored.
    Degraded(Vec<CandidateSubjectiveQuestion>),
}

impl Ranking {
    pub fn is_degraded(&self) -> bool {
        matches!(self, Ranking::Degraded(_))
    }

    pub fn len(&self) -> usize {
        match self {
            Ranking::Scored(v) => v.len(),
            Ranking::Degraded(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Candidates with their scores filled in (unset when degraded).
    pub fn into_candidates(self) -> Vec<CandidateSubjectiveQuestion> {
        match self {
            Ranking::Scored(v) => v
                .into_iter()
                .map(|s| s.candidate.with_score(s.score))
                .collect(),
            Ranking::Degraded(v) => v,
        }
    }
}

fn score_all(
    query_text: &str,
    candidates: &[CandidateSubjectiveQuestion],
    backend: &dyn Embedder,
) -> Result<Vec<ScoredCandidate>, EmbedError> {
    let query = embed(query_text, backend)?;
    candidates
        .iter()
        .map(|c| {
            let score = quantize(embed(&c.text, backend)?.cosine(&query)?);
            Ok(ScoredCandidate {
                candidate: CandidateSubjectiveQuestion {
                    score: Some(score),
                    ..c.clone()
                },
                score,
            })
        })
        .collect()
}

/// Scores each candidate against `query_text` and returns the top `k`.
pub fn rank(
    query_text: &str,
    candidates: &[CandidateSubjectiveQuestion],
    k: usize,
    backend: &dyn Embedder,
) -> Ranking {
    match score_all(query_text, candidates, backend) {
        Ok(mut scored) => {
            if k == 0 {
                return Ranking::Scored(Vec::new());
            }
            if scored.len() > k {
                scored.select_nth_unstable_by(k - 1, ranking_order);
                scored.truncate(k);
            }
            scored.sort_by(ranking_order);
            Ranking::Scored(scored)
        }
        Err(e) => {
            log::warn!("ranking degraded: {e}");
            let mut fallback: Vec<CandidateSubjectiveQuestion> = candidates
                .iter()
                .map(|c| CandidateSubjectiveQuestion {
                    score: None,
                    ..c.clone()
                })
                .collect();
            fallback.sort_by_key(|c| c.provenance.priority());
            fallback.truncate(k);
            Ranking::Degraded(fallback)
        }
    }
}

/// Removes case-folded exact duplicates and candidates whose similarity to
/// an already kept candidate reaches `threshold`. Keeps first occurrences.
/// Candidates that cannot be embedded are only checked for exact
/// duplicates.
pub fn dedupe(
    candidates: Vec<CandidateSubjectiveQuestion>,
    threshold: f64,
    backend: &dyn Embedder,
) -> Vec<CandidateSubjectiveQuestion> {
    let mut seen = HashSet::new();
    let mut kept: Vec<(CandidateSubjectiveQuestion, Option<EmbeddingVector>)> = Vec::new();
    for c in candidates {
        if !seen.insert(fold(&normalize(&c.text))) {
            continue;
        }
        let vector = embed(&c.text, backend).ok();
        let near = vector.as_ref().is_some_and(|v| {
            kept.iter()
                .filter_map(|(_, kv)| kv.as_ref())
                .any(|kv| v.cosine(kv).is_ok_and(|s| s >= threshold))
        });
        if !near {
            kept.push((c, vector));
        }
    }
    kept.into_iter().map(|(c, _)| c).collect()
}

/// What the ranking query is built from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    #[default]
    QuestionAnswer,
    QuestionOnly,
}

pub fn query_text(question: &str, answer: &str, mode: QueryMode) -> String {
    match mode {
        QueryMode::QuestionAnswer if !normalize(answer).is_empty() => {
            normalize(&format!("{question} {answer}"))
        }
        _ => normalize(question),
    }
}
