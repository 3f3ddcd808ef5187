//! Converts objective question/answer pairs into short subjective questions.
//!
//! Each input pair is routed by [`classifier`]: multi-option questions are
//! skipped, wh-questions pass through unchanged, and declarative stems are
//! expanded by up to three generators ([`rules`] templates bound to mined
//! [`clusters`], a People-Also-Ask style knowledge base in [`kb`], and a
//! pluggable question-generation model in [`neural`]). The pooled candidates
//! are deduplicated and ranked by dense similarity in [`ranker`];
//! [`evaluation`] scores ranked output with Recall@k and Precision@k.
//!
//! Every external dependency (annotator, knowledge base, generator,
//! embedder) sits behind a trait with a deterministic offline
//! implementation, so whole-corpus runs can be replayed byte for byte.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! stage.

pub mod annotate;
pub mod classifier;
pub mod clusters;
pub mod config;
pub mod evaluation;
pub mod kb;
pub mod neural;
pub mod pipeline;
pub mod ranker;
pub mod remote;
pub mod rules;
pub mod text;

pub use annotate::{Annotation, Annotator, LexiconAnnotator};
pub use classifier::{classify, CategoryLabel, ClassifierConfig};
pub use clusters::{assign_cluster, mine_clusters, Cluster, ClusterKey, ClusterSet};
pub use config::PipelineConfig;
pub use evaluation::{evaluate_corpus, relative_improvement, EvalResult, Matcher};
pub use pipeline::{Components, OutputRecord, Pipeline};
pub use ranker::{Embedder, HashingEmbedder};
pub use rules::RuleTransformer;
pub use text::{AnswerKey, CandidateSubjectiveQuestion, CorpusRecord, ObjectiveQuestion, Provenance};
