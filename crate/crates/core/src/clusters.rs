//! Token-pattern clusters over declarative question stems.
//!
//! Every question contributes three keys: its last word, its last two words
//! and its first word (case-folded, punctuation and blanks ignored). Keys seen
//! at least `min_frequency` times are retained and bound to a rule template.

use std::borrow::Borrow;
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rules::{template_for_key, TemplateId};
use crate::text::{fold, words, ObjectiveQuestion};

/// Question count the reference frequency threshold of 500 was tuned on.
pub const REFERENCE_CORPUS_SIZE: usize = 270_000;
pub const REFERENCE_MIN_FREQUENCY: usize = 500;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("min_frequency must be at least 1")]
    ZeroThreshold,
    #[error("cluster file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cluster file {path}: {source}")]
    Format {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("malformed cluster entry: {0}")]
    BadEntry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum KeyKind {
    LastToken,
    LastBigram,
    FirstToken,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClusterKey {
    LastToken(String),
    LastBigram(String, String),
    FirstToken(String),
}

impl ClusterKey {
    pub fn kind(&self) -> KeyKind {
        match self {
            ClusterKey::LastToken(_) => KeyKind::LastToken,
            ClusterKey::LastBigram(..) => KeyKind::LastBigram,
            ClusterKey::FirstToken(_) => KeyKind::FirstToken,
        }
    }

    pub fn tokens(&self) -> Vec<&str> {
        match self {
            ClusterKey::LastToken(t) | ClusterKey::FirstToken(t) => vec![t],
            ClusterKey::LastBigram(a, b) => vec![a, b],
        }
    }

    /// The word whose identity decides the template binding.
    pub fn last(&self) -> &str {
        match self {
            ClusterKey::LastToken(t) | ClusterKey::FirstToken(t) => t,
            ClusterKey::LastBigram(_, b) => b,
        }
    }

    fn from_parts(kind: KeyKind, tokens: &[String]) -> Result<Self, ClusterError> {
        let folded: Vec<String> = tokens.iter().map(|t| fold(t)).collect();
        match (kind, folded.as_slice()) {
            (KeyKind::LastToken, [t]) => Ok(ClusterKey::LastToken(t.clone())),
            (KeyKind::FirstToken, [t]) => Ok(ClusterKey::FirstToken(t.clone())),
            (KeyKind::LastBigram, [a, b]) => Ok(ClusterKey::LastBigram(a.clone(), b.clone())),
            _ => Err(ClusterError::BadEntry(format!(
                "{kind:?} cannot carry {} token(s)",
                tokens.len()
            ))),
        }
    }
}

/// The keys a question contributes, in assignment precedence order
/// (bigram, last word, first word).
pub fn question_keys(question: &ObjectiveQuestion) -> Vec<ClusterKey> {
    let w: Vec<String> = words(question.tokens()).map(fold).collect();
    let mut keys = Vec::with_capacity(3);
    if let [.., a, b] = w.as_slice() {
        keys.push(ClusterKey::LastBigram(a.clone(), b.clone()));
    }
    if let Some(last) = w.last() {
        keys.push(ClusterKey::LastToken(last.clone()));
    }
    if let Some(first) = w.first() {
        keys.push(ClusterKey::FirstToken(first.clone()));
    }
    keys
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub key: ClusterKey,
    pub frequency: usize,
    pub template_id: TemplateId,
}

/// On-disk form of a cluster.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClusterRecord {
    key_kind: KeyKind,
    tokens: Vec<String>,
    frequency: usize,
    template_id: TemplateId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClusterSet {
    clusters: BTreeMap<ClusterKey, Cluster>,
}

impl ClusterSet {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn get(&self, key: &ClusterKey) -> Option<&Cluster> {
        self.clusters.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Cluster> {
        self.clusters.values()
    }

    pub fn insert(&mut self, cluster: Cluster) {
        self.clusters.insert(cluster.key.clone(), cluster);
    }

    pub fn to_json(&self) -> String {
        let records: Vec<ClusterRecord> = self
            .iter()
            .map(|c| ClusterRecord {
                key_kind: c.key.kind(),
                tokens: c.key.tokens().into_iter().map(String::from).collect(),
                frequency: c.frequency,
                template_id: c.template_id,
            })
            .collect();
        serde_json::to_string_pretty(&records).expect("cluster records serialize")
    }

    pub fn from_json(json: &str) -> Result<Self, ClusterError> {
        let records: Vec<ClusterRecord> =
            serde_json::from_str(json).map_err(|source| ClusterError::Format {
                path: "<inline>".into(),
                source,
            })?;
        let mut set = ClusterSet::default();
        for r in records {
            let key = ClusterKey::from_parts(r.key_kind, &r.tokens)?;
            set.insert(Cluster {
                key,
                frequency: r.frequency,
                template_id: r.template_id,
            });
        }
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<(), ClusterError> {
        fs::write(path, self.to_json() + "\n").map_err(|source| ClusterError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ClusterError> {
        let json = fs::read_to_string(path).map_err(|source| ClusterError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&json).map_err(|e| match e {
            ClusterError::Format { source, .. } => ClusterError::Format {
                path: path.display().to_string(),
                source,
            },
            other => other,
        })
    }
}

/// Threshold scaled to corpus size: `max(2, round(n * 500 / 270000))`.
pub fn default_min_frequency(corpus_size: usize) -> usize {
    let scaled =
        (corpus_size as f64 * REFERENCE_MIN_FREQUENCY as f64 / REFERENCE_CORPUS_SIZE as f64).round();
    (scaled as usize).max(2)
}

/// Counts every key over `corpus` and keeps those with frequency at least
/// `min_frequency`. Order of the corpus does not matter.
pub fn mine_clusters<Q>(corpus: &[Q], min_frequency: usize) -> Result<ClusterSet, ClusterError>
where
    Q: Borrow<ObjectiveQuestion> + Sync,
{
    if min_frequency == 0 {
        return Err(ClusterError::ZeroThreshold);
    }
    let counts = corpus
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<ClusterKey, usize>, q| {
            for key in question_keys(q.borrow()) {
                *acc.entry(key).or_insert(0) += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        });
    let clusters = counts
        .into_iter()
        .filter(|(_, f)| *f >= min_frequency)
        .map(|(key, frequency)| {
            let template_id = template_for_key(&key);
            (key.clone(), Cluster { key, frequency, template_id })
        })
        .collect();
    Ok(ClusterSet { clusters })
}

/// The most specific retained cluster matching the question, or `None` when
/// the question must be handled by the other generation components.
pub fn assign_cluster<'a>(question: &ObjectiveQuestion, clusters: &'a ClusterSet) -> Option<&'a Cluster> {
    question_keys(question).iter().find_map(|k| clusters.get(k))
}
