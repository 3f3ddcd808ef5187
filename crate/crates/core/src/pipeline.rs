//! Corpus conversion: classify, generate from each component, filter,
//! deduplicate, rank and emit one output record per input record.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{AnnotateError, Annotator, LexiconAnnotator};
use crate::classifier::{classify, CategoryLabel};
use crate::clusters::{assign_cluster, ClusterError, ClusterSet};
use crate::config::{ConfigError, EmbedderBackend, NeuralBackend, PipelineConfig};
use crate::kb::{build_queries, filter_candidates, HttpPaaSource, KbClient, KbError, KbMode, ReplayStore};
use crate::neural::{
    generate, Bounded, GenerateError, GenerationRequest, HttpGenerator, QuestionGenerator, RecordedGenerator,
    RecordingGenerator,
};
use crate::ranker::{dedupe, query_text, rank, Embedder, HashingEmbedder, HttpEmbedder, Ranking};
use crate::remote::{HttpClient, RemoteError};
use crate::rules::{to_declarative, RuleTransformer};
use crate::text::{as_question, fold, normalize, AnswerKey, CandidateSubjectiveQuestion, CorpusRecord, Provenance};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Clusters(#[from] ClusterError),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error("annotator: {0}")]
    Annotator(#[from] AnnotateError),
    #[error("generator: {0}")]
    Generator(#[from] GenerateError),
    #[error("endpoint: {0}")]
    Remote(#[from] RemoteError),
    #[error("worker pool: {0}")]
    Workers(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkipReason {
    MultiOptionDependent,
    EmptyAnswer,
    AllComponentsFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub text: String,
    pub score: Option<f64>,
    pub provenance: Provenance,
}

impl From<CandidateSubjectiveQuestion> for RankedCandidate {
    fn from(c: CandidateSubjectiveQuestion) -> Self {
        Self {
            text: c.text,
            score: c.score,
            provenance: c.provenance,
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// One line of the output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub id: String,
    pub category: CategoryLabel,
    pub candidates: Vec<RankedCandidate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped_reason: Option<SkipReason>,
    /// Set when ranking fell back to unscored provenance order.
    #[serde(default, skip_serializing_if = "is_false")]
    pub degraded: bool,
}

/// Per-component candidates behind an output record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidatePools {
    pub template: Vec<CandidateSubjectiveQuestion>,
    /// Knowledge-base questions after relevance filtering.
    pub knowledge_base: Vec<CandidateSubjectiveQuestion>,
    pub neural: Vec<CandidateSubjectiveQuestion>,
    /// The deduplicated pool handed to the ranker.
    pub merged: Vec<CandidateSubjectiveQuestion>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordTrace {
    pub output: OutputRecord,
    pub pools: CandidatePools,
}

/// A malformed input line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConvertSummary {
    pub records: usize,
    pub skipped: usize,
    pub degraded: usize,
    pub malformed: Vec<LineError>,
}

/// The external collaborators of a pipeline.
pub struct Components {
    pub annotator: Arc<dyn Annotator>,
    pub clusters: ClusterSet,
    pub kb: KbClient,
    pub generator: Option<Box<dyn QuestionGenerator>>,
    pub embedder: Box<dyn Embedder>,
}

impl Components {
    /// Built-in lexicon, no clusters, no knowledge base, no generator and
    /// the hashing embedder.
    pub fn offline() -> Self {
        Self {
            annotator: Arc::new(LexiconAnnotator::english()),
            clusters: ClusterSet::default(),
            kb: KbClient::off(),
            generator: None,
            embedder: Box::new(HashingEmbedder::default()),
        }
    }

    pub fn from_config(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        let mut lexicon = LexiconAnnotator::english();
        for path in &cfg.annotator.lexicons {
            lexicon.extend_from_file(path)?;
        }

        let clusters = match &cfg.clusters.path {
            Some(path) => ClusterSet::load(path)?,
            None => {
                if !cfg.templates.disabled && !cfg.templates.generic_fallback {
                    log::warn!("no cluster file configured; templates will not fire");
                }
                ClusterSet::default()
            }
        };

        let kb = match cfg.kb.mode {
            KbMode::Off => KbClient::off(),
            KbMode::Replay => {
                let mut store = ReplayStore::default();
                for path in &cfg.kb.fixtures {
                    store.load_file(path)?;
                }
                KbClient::replay(store, cfg.kb.limit)
            }
            KbMode::Live => {
                let source = HttpPaaSource::new(cfg.kb.http.clone())?;
                KbClient::live(Box::new(source), cfg.kb.rate.clone(), cfg.kb.limit, Some(&cfg.kb_cache_path()))?
            }
        };

        let n = &cfg.neural;
        let generator: Option<Box<dyn QuestionGenerator>> = match n.backend {
            NeuralBackend::Off => None,
            NeuralBackend::Recorded => {
                let path = n.recorded.as_ref().expect("validated");
                Some(Box::new(Bounded::new(RecordedGenerator::load(path)?, n.max_in_flight)))
            }
            NeuralBackend::Http => {
                let live = HttpGenerator::new(&n.identity, &n.prompt, HttpClient::new(n.endpoint.clone())?);
                match &n.record_to {
                    Some(path) => {
                        let rec = RecordingGenerator::new(live, path).map_err(|source| PipelineError::Io {
                            context: path.display().to_string(),
                            source,
                        })?;
                        Some(Box::new(Bounded::new(rec, n.max_in_flight)))
                    }
                    None => Some(Box::new(Bounded::new(live, n.max_in_flight))),
                }
            }
        };

        let r = &cfg.ranker;
        let embedder: Box<dyn Embedder> = match r.backend {
            EmbedderBackend::Hashing => Box::new(HashingEmbedder::new(r.dimension)),
            EmbedderBackend::Http => Box::new(HttpEmbedder::new(&r.identity, HttpClient::new(r.endpoint.clone())?, false)),
        };

        Ok(Self {
            annotator: Arc::new(lexicon),
            clusters,
            kb,
            generator,
            embedder,
        })
    }
}

pub struct Pipeline {
    config: PipelineConfig,
    transformer: RuleTransformer,
    clusters: ClusterSet,
    kb: KbClient,
    generator: Option<Box<dyn QuestionGenerator>>,
    embedder: Box<dyn Embedder>,
    workers: rayon::ThreadPool,
}

const CHUNK: usize = 512;

impl Pipeline {
    pub fn new(config: PipelineConfig, components: Components) -> Result<Self, PipelineError> {
        config.validate()?;
        if config.deterministic {
            let nondeterministic = components.generator.as_ref().is_some_and(|g| !g.is_deterministic())
                || !components.embedder.is_deterministic();
            if nondeterministic {
                return Err(ConfigError::Invalid("deterministic runs need deterministic backends".into()).into());
            }
        }
        let workers = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| PipelineError::Workers(e.to_string()))?;
        Ok(Self {
            config,
            transformer: RuleTransformer::new(components.annotator),
            clusters: components.clusters,
            kb: components.kb,
            generator: components.generator,
            embedder: components.embedder,
            workers,
        })
    }

    pub fn from_config(config: PipelineConfig) -> Result<Self, PipelineError> {
        let components = Components::from_config(&config)?;
        Self::new(config, components)
    }

    pub fn load(config_path: &Path) -> Result<Self, PipelineError> {
        Self::from_config(PipelineConfig::load(config_path)?)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn process(&self, record: &CorpusRecord) -> OutputRecord {
        self.process_detailed(record).output
    }

    pub fn process_detailed(&self, record: &CorpusRecord) -> RecordTrace {
        let question = record.question();
        let answer = record.answer();
        let category = classify(&question, &self.config.classifier)
            .unwrap_or(CategoryLabel::DeclarativeSentence);
        let mut output = OutputRecord {
            id: record.id.clone(),
            category,
            candidates: Vec::new(),
            skipped_reason: None,
            degraded: false,
        };
        let mut pools = CandidatePools::default();

        match category {
            CategoryLabel::MultiOptionDependent => {
                output.skipped_reason = Some(SkipReason::MultiOptionDependent);
            }
            CategoryLabel::WhWord => {
                output.candidates.push(RankedCandidate {
                    text: as_question(question.text()),
                    score: None,
                    provenance: Provenance::Template,
                });
            }
            CategoryLabel::DeclarativeSentence => {
                if !answer.is_empty() {
                    pools.template = self.template_candidates(&question, &answer);
                    pools.neural = self.neural_candidates(&question, &answer);
                }
                pools.knowledge_base = self.kb_candidates(&question, &answer);

                // KB last, so dropping it never changes which template or
                // neural candidates survive deduplication.
                let pooled: Vec<CandidateSubjectiveQuestion> = pools
                    .template
                    .iter()
                    .chain(&pools.neural)
                    .chain(&pools.knowledge_base)
                    .cloned()
                    .collect();
                pools.merged = dedupe(pooled, self.config.ranker.near_duplicate_threshold, &*self.embedder);

                if pools.merged.is_empty() {
                    output.skipped_reason = Some(if answer.is_empty() {
                        SkipReason::EmptyAnswer
                    } else {
                        SkipReason::AllComponentsFailed
                    });
                } else {
                    let (ranked, degraded) = self.rank(&question.normalized(), &answer, &pools.merged);
                    output.candidates = ranked.into_iter().map(RankedCandidate::from).collect();
                    output.degraded = degraded;
                }
            }
        }
        RecordTrace { output, pools }
    }

    fn template_candidates(
        &self,
        question: &crate::text::ObjectiveQuestion,
        answer: &AnswerKey,
    ) -> Vec<CandidateSubjectiveQuestion> {
        if self.config.templates.disabled {
            return Vec::new();
        }
        let cluster = assign_cluster(question, &self.clusters);
        if cluster.is_none() && !self.config.templates.generic_fallback {
            return Vec::new();
        }
        match self.transformer.transform(question, answer, cluster) {
            Ok(c) => vec![c],
            Err(e) => {
                log::debug!("{}: no template candidate: {e}", question.id());
                Vec::new()
            }
        }
    }

    fn kb_candidates(
        &self,
        question: &crate::text::ObjectiveQuestion,
        answer: &AnswerKey,
    ) -> Vec<CandidateSubjectiveQuestion> {
        if self.kb.mode() == KbMode::Off {
            return Vec::new();
        }
        let mut seen = std::collections::HashSet::new();
        let mut raw: Vec<(String, String)> = Vec::new();
        for query in build_queries(question, answer) {
            match self.kb.fetch(&query) {
                Ok(result) => {
                    for q in result.questions {
                        if seen.insert(fold(&normalize(&q))) {
                            raw.push((q, query.text.clone()));
                        }
                    }
                }
                Err(KbError::MissingFixture(q)) => log::debug!("{}: no fixture for {q:?}", question.id()),
                Err(e) => log::warn!("{}: {e}", question.id()),
            }
        }
        let texts: Vec<String> = raw.iter().map(|(t, _)| t.clone()).collect();
        let kept = filter_candidates(&texts, question, answer, &self.config.kb.filter, &*self.embedder);
        // filtering preserves order, so a single forward scan pairs the queries back up
        let mut source = raw.into_iter();
        kept.into_iter()
            .filter_map(|text| {
                let (_, query) = source.by_ref().find(|(t, _)| *t == text)?;
                Some(CandidateSubjectiveQuestion::new(&text, Provenance::KnowledgeBase).with_source_query(query))
            })
            .collect()
    }

    fn neural_candidates(
        &self,
        question: &crate::text::ObjectiveQuestion,
        answer: &AnswerKey,
    ) -> Vec<CandidateSubjectiveQuestion> {
        let Some(generator) = &self.generator else {
            return Vec::new();
        };
        let context = to_declarative(question, answer)
            .unwrap_or_else(|_| format!("{} {}", question.normalized(), answer.normalized()));
        let request = GenerationRequest::new(&context, &answer.normalized(), self.config.neural.n);
        generate(&request, &**generator)
    }

    fn rank(
        &self,
        question: &str,
        answer: &AnswerKey,
        pool: &[CandidateSubjectiveQuestion],
    ) -> (Vec<CandidateSubjectiveQuestion>, bool) {
        let k = self.config.k;
        let query = query_text(question, &answer.normalized(), self.config.ranker.query);
        let pin = self.config.ranker.pin_template && pool.iter().any(|c| c.provenance == Provenance::Template);
        let ranking = rank(&query, pool, if pin { pool.len() } else { k }, &*self.embedder);
        let degraded = matches!(ranking, Ranking::Degraded(_));
        let mut ranked = ranking.into_candidates();
        if pin {
            if let Some(i) = ranked.iter().position(|c| c.provenance == Provenance::Template) {
                let t = ranked.remove(i);
                ranked.insert(0, t);
            }
        }
        ranked.truncate(k);
        (ranked, degraded)
    }

    /// Converts records in parallel; output order follows input order.
    pub fn convert(&self, records: &[CorpusRecord]) -> Vec<OutputRecord> {
        self.workers
            .install(|| records.par_iter().map(|r| self.process(r)).collect())
    }

    /// Reads a JSON Lines corpus and writes one JSON line per parsed record.
    /// Malformed lines are logged with their line number and skipped.
    pub fn convert_stream<R: BufRead, W: Write>(
        &self,
        input: R,
        mut output: W,
    ) -> Result<ConvertSummary, PipelineError> {
        let mut summary = ConvertSummary::default();
        let mut batch: Vec<CorpusRecord> = Vec::with_capacity(CHUNK);
        let mut lines = input.lines().enumerate();
        loop {
            let next = lines.next();
            let done = next.is_none();
            if let Some((i, line)) = next {
                let line = line.map_err(|source| PipelineError::Io {
                    context: format!("input line {}", i + 1),
                    source,
                })?;
                match parse_line(&line) {
                    Ok(Some(record)) => batch.push(record),
                    Ok(None) => {}
                    Err(message) => {
                        log::error!("input line {}: {message}", i + 1);
                        summary.malformed.push(LineError { line: i + 1, message });
                    }
                }
            }
            if batch.len() == CHUNK || (done && !batch.is_empty()) {
                for out in self.convert(&batch) {
                    summary.records += 1;
                    summary.skipped += usize::from(out.skipped_reason.is_some());
                    summary.degraded += usize::from(out.degraded);
                    let line = serde_json::to_string(&out).expect("output record serializes");
                    writeln!(output, "{line}").map_err(|source| PipelineError::Io {
                        context: "output".into(),
                        source,
                    })?;
                }
                batch.clear();
            }
            if done {
                break;
            }
        }
        output.flush().map_err(|source| PipelineError::Io {
            context: "output".into(),
            source,
        })?;
        Ok(summary)
    }
}

/// Parses one corpus line; blank lines yield `None`.
pub fn parse_line(line: &str) -> Result<Option<CorpusRecord>, String> {
    if line.trim().is_empty() {
        return Ok(None);
    }
    let record: CorpusRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if record.id.trim().is_empty() {
        return Err("empty id".into());
    }
    if normalize(&record.question).is_empty() {
        return Err(format!("record {:?} has an empty question", record.id));
    }
    Ok(Some(record))
}

/// Reads a whole corpus, collecting malformed lines instead of failing.
pub fn read_corpus<R: BufRead>(input: R) -> Result<(Vec<CorpusRecord>, Vec<LineError>), std::io::Error> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in input.lines().enumerate() {
        match parse_line(&line?) {
            Ok(Some(r)) => records.push(r),
            Ok(None) => {}
            Err(message) => errors.push(LineError { line: i + 1, message }),
        }
    }
    Ok((records, errors))
}
