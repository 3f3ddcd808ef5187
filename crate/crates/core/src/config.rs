//! Pipeline configuration, read from a single TOML file.
//!
//! Relative paths are resolved against the directory holding the file.
//! Secrets never live in the file: endpoints name an environment variable
//! through `api_key_env` instead.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::ClassifierConfig;
use crate::evaluation::Matcher;
use crate::kb::{FilterConfig, HttpSourceConfig, KbMode, RateLimit, DEFAULT_LIMIT};
use crate::neural::{DEFAULT_IDENTITY, DEFAULT_N, DEFAULT_PROMPT};
use crate::ranker::QueryMode;
use crate::remote::EndpointConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSettings {
    /// Mined cluster file used to gate templates.
    pub path: Option<PathBuf>,
    /// Threshold for `mine-clusters` when none is given on the command line.
    pub min_frequency: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateSettings {
    /// Run the generic template for questions without a mined cluster.
    pub generic_fallback: bool,
    pub disabled: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotatorSettings {
    /// JSON lexicon overlays applied on top of the built-in dictionary.
    pub lexicons: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KbSettings {
    pub mode: KbMode,
    /// Questions kept per query.
    pub limit: usize,
    /// Replay fixtures, loaded in order; later files win on repeated queries.
    pub fixtures: Vec<PathBuf>,
    /// Live responses are appended here; defaults to `<cache_dir>/kb_cache.jsonl`.
    pub cache: Option<PathBuf>,
    pub filter: FilterConfig,
    pub rate: RateLimit,
    pub http: HttpSourceConfig,
}

impl Default for KbSettings {
    fn default() -> Self {
        Self {
            mode: KbMode::Off,
            limit: DEFAULT_LIMIT,
            fixtures: Vec::new(),
            cache: None,
            filter: FilterConfig::default(),
            rate: RateLimit::default(),
            http: HttpSourceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeuralBackend {
    #[default]
    Off,
    Recorded,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralSettings {
    pub backend: NeuralBackend,
    pub identity: String,
    pub prompt: String,
    pub n: usize,
    pub max_in_flight: usize,
    /// Fixture read by the `recorded` backend.
    pub recorded: Option<PathBuf>,
    /// When set, live responses are appended to this fixture.
    pub record_to: Option<PathBuf>,
    pub endpoint: EndpointConfig,
}

impl Default for NeuralSettings {
    fn default() -> Self {
        Self {
            backend: NeuralBackend::Off,
            identity: DEFAULT_IDENTITY.into(),
            prompt: DEFAULT_PROMPT.into(),
            n: DEFAULT_N,
            max_in_flight: 4,
            recorded: None,
            record_to: None,
            endpoint: EndpointConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderBackend {
    #[default]
    Hashing,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankerSettings {
    pub backend: EmbedderBackend,
    pub dimension: usize,
    pub identity: String,
    /// Candidates at least this similar to a kept one are dropped.
    pub near_duplicate_threshold: f64,
    pub query: QueryMode,
    /// Keep the template candidate at rank 1 whenever there is one.
    pub pin_template: bool,
    pub endpoint: EndpointConfig,
}

impl Default for RankerSettings {
    fn default() -> Self {
        Self {
            backend: EmbedderBackend::Hashing,
            dimension: crate::ranker::HashingEmbedder::DEFAULT_DIMENSION,
            identity: "sentence-transformers/msmarco-distilroberta-base-v2".into(),
            near_duplicate_threshold: 0.95,
            query: QueryMode::QuestionAnswer,
            pin_template: false,
            endpoint: EndpointConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub k: usize,
    /// Worker threads for corpus runs; 0 picks one per core.
    pub workers: usize,
    /// Refuse any setting that could make two runs differ.
    pub deterministic: bool,
    pub cache_dir: PathBuf,
    pub matcher: Matcher,
    pub classifier: ClassifierConfig,
    pub clusters: ClusterSettings,
    pub templates: TemplateSettings,
    pub annotator: AnnotatorSettings,
    pub kb: KbSettings,
    pub neural: NeuralSettings,
    pub ranker: RankerSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: 3,
            workers: 0,
            deterministic: false,
            cache_dir: PathBuf::from("cache"),
            matcher: Matcher::default(),
            classifier: ClassifierConfig::default(),
            clusters: ClusterSettings::default(),
            templates: TemplateSettings::default(),
            annotator: AnnotatorSettings::default(),
            kb: KbSettings::default(),
            neural: NeuralSettings::default(),
            ranker: RankerSettings::default(),
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn check_unit(name: &str, v: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} must be in [0, 1], got {v}")))
    }
}

impl PipelineConfig {
    /// Parses TOML text; relative paths are resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: base_dir.display().to_string(),
            message: e.to_string(),
        })?;
        cfg.resolve_paths(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.cache_dir);
        if let Some(p) = &mut self.clusters.path {
            resolve(base, p);
        }
        for p in &mut self.annotator.lexicons {
            resolve(base, p);
        }
        for p in &mut self.kb.fixtures {
            resolve(base, p);
        }
        for p in [&mut self.kb.cache, &mut self.neural.recorded, &mut self.neural.record_to]
            .into_iter()
            .flatten()
        {
            resolve(base, p);
        }
    }

    /// Where live knowledge-base responses are written.
    pub fn kb_cache_path(&self) -> PathBuf {
        self.kb
            .cache
            .clone()
            .unwrap_or_else(|| self.cache_dir.join("kb_cache.jsonl"))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k == 0 {
            return Err(ConfigError::Invalid("k must be at least 1".into()));
        }
        self.classifier
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        check_unit("kb.filter.lexical_floor", self.kb.filter.lexical_floor)?;
        check_unit("kb.filter.semantic_floor", self.kb.filter.semantic_floor)?;
        check_unit("ranker.near_duplicate_threshold", self.ranker.near_duplicate_threshold)?;
        if let Matcher::Similarity(t) = self.matcher {
            check_unit("matcher threshold", t)?;
        }
        if self.clusters.min_frequency == Some(0) {
            return Err(ConfigError::Invalid("clusters.min_frequency must be at least 1".into()));
        }
        if self.kb.limit == 0 {
            return Err(ConfigError::Invalid("kb.limit must be at least 1".into()));
        }
        if self.ranker.dimension == 0 {
            return Err(ConfigError::Invalid("ranker.dimension must be at least 1".into()));
        }
        match self.kb.mode {
            KbMode::Replay if self.kb.fixtures.is_empty() => {
                return Err(ConfigError::Invalid("kb.mode = replay needs kb.fixtures".into()))
            }
            KbMode::Live if self.kb.http.endpoint.url.is_empty() => {
                return Err(ConfigError::Invalid("kb.mode = live needs kb.http.endpoint.url".into()))
            }
            _ => {}
        }
        match self.neural.backend {
            NeuralBackend::Recorded if self.neural.recorded.is_none() => {
                return Err(ConfigError::Invalid("neural.backend = recorded needs neural.recorded".into()))
            }
            NeuralBackend::Http if self.neural.endpoint.url.is_empty() => {
                return Err(ConfigError::Invalid("neural.backend = http needs neural.endpoint.url".into()))
            }
            _ => {}
        }
        if self.ranker.backend == EmbedderBackend::Http && self.ranker.endpoint.url.is_empty() {
            return Err(ConfigError::Invalid("ranker.backend = http needs ranker.endpoint.url".into()));
        }
        if self.deterministic {
            if self.kb.mode == KbMode::Live {
                return Err(ConfigError::Invalid("deterministic runs need kb.mode replay or off".into()));
            }
            if self.neural.backend == NeuralBackend::Http {
                return Err(ConfigError::Invalid("deterministic runs need a recorded or disabled generator".into()));
            }
            if self.ranker.backend == EmbedderBackend::Http {
                return Err(ConfigError::Invalid("deterministic runs need the hashing embedder".into()));
            }
        }
        Ok(())
    }
}
