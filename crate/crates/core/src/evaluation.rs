//! Recall@k / Precision@k scoring of ranked output against gold questions.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ranker::{embed, Embedder, EmbeddingVector};
use crate::text::{fold, normalize};

pub const DEFAULT_KS: [usize; 3] = [1, 2, 3];
pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.75;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("k must be at least 1")]
    InvalidK,
    #[error("run and gold ids differ; missing gold for {missing_gold:?}, missing run for {missing_run:?}")]
    IdMismatch {
        missing_gold: Vec<String>,
        missing_run: Vec<String>,
    },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("no record has a non-empty gold set")]
    NothingToEvaluate,
    #[error("relative improvement is undefined for a zero baseline")]
    UndefinedImprovement,
    #[error("bad matcher {0:?}; expected \"exact\" or \"similarity:<threshold>\"")]
    BadMatcher(String),
    #[error("{path}: {message}")]
    Input { path: String, message: String },
}

/// How a candidate is judged against a gold question.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Matcher {
    /// Case-folded, punctuation-stripped equality.
    ExactNormalized,
    /// Cosine similarity at or above the threshold.
    Similarity(f64),
}

impl Default for Matcher {
    fn default() -> Self {
        Matcher::Similarity(DEFAULT_SIMILARITY_THRESHOLD)
    }
}

impl FromStr for Matcher {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("exact") || s.eq_ignore_ascii_case("exact_normalized") {
            return Ok(Matcher::ExactNormalized);
        }
        let bad = || EvalError::BadMatcher(s.to_string());
        match s.split_once(':') {
            Some((name, t)) if name.eq_ignore_ascii_case("similarity") => {
                let t: f64 = t.trim().parse().map_err(|_| bad())?;
                if (0.0..=1.0).contains(&t) {
                    Ok(Matcher::Similarity(t))
                } else {
                    Err(bad())
                }
            }
            None if s.eq_ignore_ascii_case("similarity") => Ok(Matcher::default()),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Matcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Matcher::ExactNormalized => f.write_str("exact"),
            Matcher::Similarity(t) => write!(f, "similarity:{t}"),
        }
    }
}

impl Serialize for Matcher {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Matcher {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Key used by the exact matcher.
pub fn match_key(text: &str) -> String {
    let stripped: String = fold(&normalize(text))
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect();
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSet {
    pub id: String,
    pub gold: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: String,
    pub ranked: Vec<String>,
}

/// Gold questions prepared once for repeated judging.
pub struct PreparedGold<'a> {
    gold: &'a [String],
    keys: Vec<String>,
    vectors: Vec<Option<EmbeddingVector>>,
}

impl<'a> PreparedGold<'a> {
    pub fn new(gold: &'a [String], matcher: Matcher, embedder: &dyn Embedder) -> Self {
        let keys = gold.iter().map(|g| match_key(g)).collect();
        let vectors = match matcher {
            Matcher::ExactNormalized => Vec::new(),
            Matcher::Similarity(_) => gold
                .iter()
                .map(|g| {
                    embed(g, embedder)
                        .map_err(|e| log::warn!("gold question {g:?} not embeddable: {e}"))
                        .ok()
                })
                .collect(),
        };
        Self { gold, keys, vectors }
    }

    pub fn len(&self) -> usize {
        self.gold.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gold.is_empty()
    }
}

/// Index of the gold item `candidate` matches, skipping consumed items.
/// Under the similarity matcher the most similar eligible item wins, the
/// lower index on ties.
pub fn judge_relevant(
    candidate: &str,
    gold: &PreparedGold<'_>,
    consumed: &[bool],
    matcher: Matcher,
    embedder: &dyn Embedder,
) -> Option<usize> {
    let open = |i: &usize| !consumed.get(*i).copied().unwrap_or(false);
    match matcher {
        Matcher::ExactNormalized => {
            let key = match_key(candidate);
            (0..gold.len()).filter(open).find(|&i| gold.keys[i] == key)
        }
        Matcher::Similarity(threshold) => {
            let v = embed(candidate, embedder).ok()?;
            let mut best: Option<(usize, f64)> = None;
            for i in (0..gold.len()).filter(open) {
                let Some(g) = &gold.vectors[i] else { continue };
                let Ok(s) = v.cosine(g) else { continue };
                if s >= threshold && best.is_none_or(|(_, b)| s > b) {
                    best = Some((i, s));
                }
            }
            best.map(|(i, _)| i)
        }
    }
}

/// Greedy top-down relevance of the first `depth` ranked candidates; each
/// gold item is consumed by at most one candidate.
pub fn hit_pattern(
    ranked: &[String],
    gold: &PreparedGold<'_>,
    depth: usize,
    matcher: Matcher,
    embedder: &dyn Embedder,
) -> Vec<bool> {
    let mut consumed = vec![false; gold.len()];
    ranked
        .iter()
        .take(depth)
        .map(|c| match judge_relevant(c, gold, &consumed, matcher, embedder) {
            Some(i) => {
                consumed[i] = true;
                true
            }
            None => false,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub hits: usize,
    pub precision: f64,
    pub recall: f64,
}

/// Metrics for the first `k` entries of a hit pattern. Positions past the
/// end of the pattern count as misses.
pub fn metrics_from_hits(hits: &[bool], k: usize, gold_len: usize) -> Metrics {
    assert!(k >= 1 && gold_len >= 1);
    let h = hits.iter().take(k).filter(|&&b| b).count();
    Metrics {
        hits: h,
        precision: h as f64 / k as f64,
        recall: h as f64 / gold_len as f64,
    }
}

/// Metrics of one ranked list; `None` for an empty gold set.
pub fn metrics_at_k(
    ranked: &[String],
    gold: &[String],
    k: usize,
    matcher: Matcher,
    embedder: &dyn Embedder,
) -> Result<Option<Metrics>, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    if gold.is_empty() {
        return Ok(None);
    }
    let prepared = PreparedGold::new(gold, matcher, embedder);
    let hits = hit_pattern(ranked, &prepared, k, matcher, embedder);
    Ok(Some(metrics_from_hits(&hits, k, gold.len())))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KMetrics {
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalResult {
    pub per_k: BTreeMap<usize, KMetrics>,
    pub n_questions: usize,
}

impl EvalResult {
    pub fn ks(&self) -> Vec<usize> {
        self.per_k.keys().copied().collect()
    }

    /// Macro average of per-question hit patterns.
    pub fn from_patterns(patterns: &[(Vec<bool>, usize)], ks: &[usize]) -> Result<Self, EvalError> {
        if ks.contains(&0) {
            return Err(EvalError::InvalidK);
        }
        if patterns.is_empty() {
            return Err(EvalError::NothingToEvaluate);
        }
        let n = patterns.len() as f64;
        let per_k = ks
            .iter()
            .map(|&k| {
                let (mut r, mut p) = (0.0, 0.0);
                for (hits, gold_len) in patterns {
                    let m = metrics_from_hits(hits, k, *gold_len);
                    r += m.recall;
                    p += m.precision;
                }
                (k, KMetrics { recall: r / n, precision: p / n })
            })
            .collect();
        Ok(Self { per_k, n_questions: patterns.len() })
    }
}

fn index_ids<'a, T>(items: &'a [T], id: impl Fn(&T) -> &str) -> Result<HashMap<&'a str, &'a T>, EvalError>
where
    T: 'a,
{
    let mut map = HashMap::with_capacity(items.len());
    for item in items {
        if map.insert(id(item), item).is_some() {
            return Err(EvalError::DuplicateId(id(item).to_string()));
        }
    }
    Ok(map)
}

/// Macro-averaged metrics over the run, in run order.
pub fn evaluate_corpus(
    run: &[RunRecord],
    golds: &[GoldSet],
    ks: &[usize],
    matcher: Matcher,
    embedder: &dyn Embedder,
) -> Result<EvalResult, EvalError> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(EvalError::InvalidK);
    }
    let gold_by_id = index_ids(golds, |g| g.id.as_str())?;
    let run_by_id = index_ids(run, |r| r.id.as_str())?;
    let mut missing_gold: Vec<String> = run
        .iter()
        .filter(|r| !gold_by_id.contains_key(r.id.as_str()))
        .map(|r| r.id.clone())
        .collect();
    let mut missing_run: Vec<String> = golds
        .iter()
        .filter(|g| !run_by_id.contains_key(g.id.as_str()))
        .map(|g| g.id.clone())
        .collect();
    if !missing_gold.is_empty() || !missing_run.is_empty() {
        missing_gold.sort();
        missing_run.sort();
        return Err(EvalError::IdMismatch { missing_gold, missing_run });
    }

    let depth = *ks.iter().max().expect("ks non-empty");
    let patterns: Vec<Option<(Vec<bool>, usize)>> = run
        .par_iter()
        .map(|r| {
            let gold = &gold_by_id[r.id.as_str()].gold;
            if gold.is_empty() {
                return None;
            }
            let prepared = PreparedGold::new(gold, matcher, embedder);
            Some((hit_pattern(&r.ranked, &prepared, depth, matcher, embedder), gold.len()))
        })
        .collect();
    let mut kept = Vec::with_capacity(patterns.len());
    for (r, p) in run.iter().zip(patterns) {
        match p {
            Some(p) => kept.push(p),
            None => log::warn!("record {:?} has an empty gold set; excluded", r.id),
        }
    }
    EvalResult::from_patterns(&kept, ks)
}

/// Percentage change of `ours` over `baseline`.
pub fn relative_improvement(ours: f64, baseline: f64) -> Result<f64, EvalError> {
    if baseline == 0.0 {
        return Err(EvalError::UndefinedImprovement);
    }
    Ok(100.0 * (ours - baseline) / baseline)
}

fn metric_columns(ks: &[usize]) -> Vec<String> {
    ks.iter()
        .map(|k| format!("R@{k}"))
        .chain(ks.iter().map(|k| format!("P@{k}")))
        .collect()
}

fn metric_values(result: &EvalResult, ks: &[usize]) -> Vec<Option<f64>> {
    let get = |k: &usize| result.per_k.get(k);
    ks.iter()
        .map(|k| get(k).map(|m| m.recall))
        .chain(ks.iter().map(|k| get(k).map(|m| m.precision)))
        .collect()
}

/// A labelled row in a report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub system: String,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub ks: Vec<usize>,
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn new(ks: &[usize]) -> Self {
        Self { ks: ks.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, system: &str, result: &EvalResult) {
        self.rows.push(ReportRow {
            system: system.to_string(),
            values: metric_values(result, &self.ks),
        });
    }

    /// Adds a row of percentage improvements of row `ours` over row
    /// `baseline`; undefined cells stay empty.
    pub fn push_improvement(&mut self, ours: usize, baseline: usize) {
        let values = self.rows[ours]
            .values
            .iter()
            .zip(&self.rows[baseline].values)
            .map(|(o, b)| match (o, b) {
                (Some(o), Some(b)) => relative_improvement(*o, *b).ok(),
                _ => None,
            })
            .collect();
        self.rows.push(ReportRow { system: "improvement %".into(), values });
    }

    /// Aligned plain-text table.
    pub fn render(&self) -> String {
        let header = metric_columns(&self.ks);
        let name_w = self.rows.iter().map(|r| r.system.len()).chain([6]).max().unwrap_or(6);
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let pct = r.system == "improvement %";
                r.values
                    .iter()
                    .map(|v| match v {
                        Some(v) if pct => format!("{v:.2}"),
                        Some(v) => format!("{v:.3}"),
                        None => "-".into(),
                    })
                    .collect()
            })
            .collect();
        let widths: Vec<usize> = header
            .iter()
            .enumerate()
            .map(|(i, h)| cells.iter().map(|c| c[i].len()).chain([h.len()]).max().unwrap_or(0))
            .collect();
        let mut out = format!("{:<name_w$}", "system");
        for (h, w) in header.iter().zip(&widths) {
            out.push_str(&format!("  {h:>w$}"));
        }
        out.push('\n');
        for (r, c) in self.rows.iter().zip(&cells) {
            out.push_str(&format!("{:<name_w$}", r.system));
            for (v, w) in c.iter().zip(&widths) {
                out.push_str(&format!("  {v:>w$}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["system".to_string()];
        header.extend(metric_columns(&self.ks));
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.system.clone()];
            rec.extend(r.values.iter().map(|v| v.map(|v| format!("{v:.6}")).unwrap_or_default()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

/// Reads the first data row of a report CSV as an [`EvalResult`], keeping
/// only the `R@k` / `P@k` columns present.
pub fn read_baseline_csv(path: &Path) -> Result<(String, EvalResult), EvalError> {
    let input_err = |message: String| EvalError::Input {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| input_err(e.to_string()))?;
    let header = reader.headers().map_err(|e| input_err(e.to_string()))?.clone();
    let row = reader
        .records()
        .next()
        .ok_or_else(|| input_err("no data rows".into()))?
        .map_err(|e| input_err(e.to_string()))?;
    let mut system = String::from("baseline");
    let mut per_k: BTreeMap<usize, KMetrics> = BTreeMap::new();
    for (name, value) in header.iter().zip(row.iter()) {
        let name = name.trim();
        if name.eq_ignore_ascii_case("system") {
            system = value.trim().to_string();
            continue;
        }
        let Some((kind, k)) = name.split_once('@') else { continue };
        let Ok(k) = k.parse::<usize>() else { continue };
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| input_err(format!("column {name}: bad number {value:?}")))?;
        let entry = per_k.entry(k).or_default();
        match kind {
            "R" | "r" => entry.recall = v,
            "P" | "p" => entry.precision = v,
            _ => {}
        }
    }
    if per_k.is_empty() {
        return Err(input_err("no R@k/P@k columns".into()));
    }
    Ok((system, EvalResult { per_k, n_questions: 0 }))
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, EvalError> {
    let input_err = |message: String| EvalError::Input {
        path: path.display().to_string(),
        message,
    };
    let file = File::open(path).map_err(|e| input_err(e.to_string()))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| input_err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| input_err(format!("line {}: {e}", n + 1)))?);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct CandidateText {
    text: String,
}

#[derive(Deserialize)]
struct RunLine {
    id: String,
    ranked: Option<Vec<String>>,
    candidates: Option<Vec<CandidateText>>,
    skipped_reason: Option<String>,
}

/// Reads a run file. Lines may carry `ranked` strings or be `convert`
/// output records with `candidates`; multi-option records that `convert`
/// skipped are dropped.
pub fn read_run(path: &Path) -> Result<Vec<RunRecord>, EvalError> {
    let lines: Vec<RunLine> = read_jsonl(path)?;
    lines
        .into_iter()
        .filter(|l| l.skipped_reason.as_deref() != Some("MultiOptionDependent"))
        .map(|l| {
            let ranked = match (l.ranked, l.candidates) {
                (Some(r), _) => r,
                (None, Some(c)) => c.into_iter().map(|c| c.text).collect(),
                (None, None) => {
                    return Err(EvalError::Input {
                        path: path.display().to_string(),
                        message: format!("record {}: neither ranked nor candidates", l.id),
                    })
                }
            };
            Ok(RunRecord { id: l.id, ranked })
        })
        .collect()
}

pub fn read_gold(path: &Path) -> Result<Vec<GoldSet>, EvalError> {
    read_jsonl(path)
}

/// Parses a comma separated list of cutoffs such as `1,2,3`.
pub fn parse_ks(s: &str) -> Result<Vec<usize>, EvalError> {
    let mut ks = Vec::new();
    let mut seen = HashSet::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let k: usize = part.parse().map_err(|_| EvalError::InvalidK)?;
        if k == 0 {
            return Err(EvalError::InvalidK);
        }
        if seen.insert(k) {
            ks.push(k);
        }
    }
    if ks.is_empty() {
        return Err(EvalError::InvalidK);
    }
    ks.sort_unstable();
    Ok(ks)
}
