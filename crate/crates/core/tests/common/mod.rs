//! Fixture loading and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use subjq::clusters::{Cluster, ClusterKey};
use subjq::ranker::{embed, Embedder};
use subjq::rules::TemplateId;
use subjq::text::{fold, CandidateSubjectiveQuestion, ObjectiveQuestion};
use subjq::CategoryLabel;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(name: &str) -> Vec<T> {
    fs::read_to_string(fixture(name))
        .unwrap_or_else(|e| panic!("{name}: {e}"))
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("{name}: {e}: {l}")))
        .collect()
}

#[derive(Debug, Deserialize)]
pub struct LabeledQuestion {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub label: CategoryLabel,
}

#[derive(Debug, Deserialize)]
pub struct GoldenTriple {
    pub question: String,
    pub answer: String,
    pub template: TemplateId,
    pub expected: String,
}

impl GoldenTriple {
    /// A cluster binding the triple's template.
    pub fn cluster(&self) -> Cluster {
        let words: Vec<String> = fold(&self.question)
            .split_whitespace()
            .map(String::from)
            .collect();
        Cluster {
            key: ClusterKey::LastToken(words.last().cloned().unwrap_or_default()),
            frequency: 1,
            template_id: self.template,
        }
    }
}

/// Word tokens of a question, skipping punctuation and blanks.
fn key_words(q: &ObjectiveQuestion) -> Vec<String> {
    q.tokens()
        .iter()
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .map(|t| fold(t))
        .collect()
}

/// Counts every key with plain nested loops and keeps those at or above
/// `min_frequency`.
pub fn brute_force_clusters(corpus: &[ObjectiveQuestion], min_frequency: usize) -> BTreeMap<ClusterKey, usize> {
    let mut counts: BTreeMap<ClusterKey, usize> = BTreeMap::new();
    for q in corpus {
        let w = key_words(q);
        if w.is_empty() {
            continue;
        }
        let mut keys = vec![
            ClusterKey::LastToken(w[w.len() - 1].clone()),
            ClusterKey::FirstToken(w[0].clone()),
        ];
        if w.len() >= 2 {
            keys.push(ClusterKey::LastBigram(w[w.len() - 2].clone(), w[w.len() - 1].clone()));
        }
        for k in keys {
            *counts.entry(k).or_default() += 1;
        }
    }
    counts.retain(|_, n| *n >= min_frequency);
    counts
}

const SUBJECTS: &[&str] = &[
    "the cell", "polio", "the telephone", "photosynthesis", "the heart", "water", "the moon",
    "law of constant proportions", "the capital of india", "sound", "light", "the earth",
];
const ENDINGS: &[&str] = &[
    "is called", "is", "is caused by", "is given by", "was invented by", "include", "are",
    "is known as", "is made of", "helps in", "is measured in", "occurs in",
];

/// Seeded synthetic corpus of declarative stems with a skewed ending mix.
pub fn synthetic_stems(n: usize, seed: u64) -> Vec<ObjectiveQuestion> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let subject = SUBJECTS.choose(&mut rng).unwrap();
            // over half end in "is called"; the rest skew toward early endings
            let ending = if rng.random_bool(0.55) {
                ENDINGS[0]
            } else {
                let r: f64 = rng.random();
                ENDINGS[((r * r) * ENDINGS.len() as f64) as usize]
            };
            let text = if rng.random_bool(0.1) {
                format!("{subject} {ending} ___ .")
            } else {
                format!("{subject} {ending}")
            };
            ObjectiveQuestion::new(format!("s{i}"), text)
        })
        .collect()
}

/// Full-sort ranking oracle: cosine against the query, rounded to nine
/// decimals, then provenance, folded text and raw text.
pub fn brute_force_rank(
    query: &str,
    pool: &[CandidateSubjectiveQuestion],
    k: usize,
    embedder: &dyn Embedder,
) -> Vec<(String, f64)> {
    let q = embed(query, embedder).unwrap();
    let mut scored: Vec<(CandidateSubjectiveQuestion, f64)> = pool
        .iter()
        .map(|c| {
            let v = embed(&c.text, embedder).unwrap();
            let dot: f64 = v.values().iter().zip(q.values()).map(|(a, b)| a * b).sum();
            (c.clone(), (dot.clamp(-1.0, 1.0) * 1e9).round() / 1e9)
        })
        .collect();
    scored.sort_by(|(a, sa), (b, sb)| {
        sb.partial_cmp(sa)
            .unwrap()
            .then(a.provenance.priority().cmp(&b.provenance.priority()))
            .then(fold(&a.text).cmp(&fold(&b.text)))
            .then(a.text.cmp(&b.text))
    });
    scored.into_iter().take(k).map(|(c, s)| (c.text, s)).collect()
}

/// Reference Recall@k / Precision@k over a hit pattern.
pub fn brute_force_metrics(hits: &[bool], k: usize, gold: usize) -> (usize, f64, f64) {
    let mut h = 0;
    for (i, hit) in hits.iter().enumerate() {
        if i < k && *hit {
            h += 1;
        }
    }
    (h, h as f64 / k as f64, h as f64 / gold as f64)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_word(rng: &mut impl Rng, vocab: &[&str]) -> String {
    vocab.choose(rng).unwrap().to_string()
}
