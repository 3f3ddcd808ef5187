//! Question generation from (context, answer) pairs through a pluggable
//! sequence-to-sequence backend.
//!
//! Offline backends: [`StubGenerator`] (fixed table) and [`RecordedGenerator`]
//! (JSON Lines fixture). [`RecordingGenerator`] wraps a live backend and
//! writes the fixture; [`HttpGenerator`] calls a hosted text2text model.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::remote::HttpClient;
use crate::text::{capitalize, fold, normalize, CandidateSubjectiveQuestion, Provenance};

pub const DEFAULT_IDENTITY: &str = "ramsrigouthamg/t5_squad_v1";
pub const DEFAULT_PROMPT: &str = "context: {context} answer: {answer}";
pub const DEFAULT_N: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenerateError {
    #[error("generation request has an empty context")]
    EmptyContext,
    #[error("generator unavailable: {0}")]
    Unavailable(String),
    #[error("fixture {path}: {message}")]
    Fixture { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub context: String,
    pub answer: String,
    pub n: usize,
}

impl GenerationRequest {
    pub fn new(context: &str, answer: &str, n: usize) -> Self {
        Self {
            context: normalize(context),
            answer: normalize(answer),
            n,
        }
    }

    pub fn validate(&self) -> Result<(), GenerateError> {
        if self.n > 0 && self.context.trim().is_empty() {
            return Err(GenerateError::EmptyContext);
        }
        Ok(())
    }

    fn key(&self) -> (String, String) {
        (fold(&self.context), fold(&self.answer))
    }
}

/// Fills `{context}` and `{answer}` in a prompt template.
pub fn render_prompt(template: &str, request: &GenerationRequest) -> String {
    template
        .replace("{context}", &request.context)
        .replace("{answer}", &request.answer)
}

pub trait QuestionGenerator: Send + Sync {
    fn identity(&self) -> &str;

    fn is_deterministic(&self) -> bool {
        true
    }

    /// Raw model outputs, possibly more or fewer than `request.n`.
    fn generate_raw(&self, request: &GenerationRequest) -> Result<Vec<String>, GenerateError>;
}

/// Runs the backend and shapes its output: strips a leading `question:`
/// label, ends each candidate with `?`, drops case-folded duplicates and
/// keeps at most `n`. Failures are logged and yield no candidates.
pub fn generate(
    request: &GenerationRequest,
    backend: &dyn QuestionGenerator,
) -> Vec<CandidateSubjectiveQuestion> {
    if request.n == 0 {
        return Vec::new();
    }
    if let Err(e) = request.validate() {
        log::warn!("{}: {e}", backend.identity());
        return Vec::new();
    }
    let raw = match backend.generate_raw(request) {
        Ok(raw) => raw,
        Err(e) => {
            log::warn!("{}: {e}", backend.identity());
            return Vec::new();
        }
    };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for text in raw {
        let text = capitalize(strip_label(&text));
        if text.trim_matches(|c: char| c.is_whitespace() || c == '?').is_empty() {
            continue;
        }
        let cand = CandidateSubjectiveQuestion::new(&text, Provenance::Neural);
        if seen.insert(fold(&cand.text)) {
            out.push(cand);
            if out.len() == request.n {
                break;
            }
        }
    }
    out
}

fn strip_label(text: &str) -> &str {
    let t = text.trim();
    match t.get(..9) {
        Some(head) if head.eq_ignore_ascii_case("question:") => t[9..].trim_start(),
        _ => t,
    }
}

/// Answers from a fixed table; unknown requests fail.
#[derive(Debug, Default, Clone)]
pub struct StubGenerator {
    table: HashMap<(String, String), Vec<String>>,
}

impl StubGenerator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, context: &str, answer: &str, outputs: Vec<String>) {
        let req = GenerationRequest::new(context, answer, 0);
        self.table.insert(req.key(), outputs);
    }
}

impl QuestionGenerator for StubGenerator {
    fn identity(&self) -> &str {
        "stub"
    }

    fn generate_raw(&self, request: &GenerationRequest) -> Result<Vec<String>, GenerateError> {
        self.table
            .get(&request.key())
            .cloned()
            .ok_or_else(|| GenerateError::Unavailable(format!("no stub entry for {:?}", request.context)))
    }
}

/// One line of a recorded-generation fixture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedGeneration {
    pub context: String,
    pub answer: String,
    pub candidates: Vec<String>,
}

/// Replays a JSON Lines fixture written by [`RecordingGenerator`].
#[derive(Debug, Default, Clone)]
pub struct RecordedGenerator {
    table: HashMap<(String, String), Vec<String>>,
}

impl RecordedGenerator {
    pub fn from_records(records: impl IntoIterator<Item = RecordedGeneration>) -> Self {
        let mut table = HashMap::new();
        for r in records {
            let req = GenerationRequest::new(&r.context, &r.answer, 0);
            table.insert(req.key(), r.candidates);
        }
        Self { table }
    }

    pub fn load(path: &Path) -> Result<Self, GenerateError> {
        let fixture_err = |message: String| GenerateError::Fixture {
            path: path.display().to_string(),
            message,
        };
        let file = File::open(path).map_err(|e| fixture_err(e.to_string()))?;
        let mut records = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| fixture_err(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(
                serde_json::from_str::<RecordedGeneration>(&line)
                    .map_err(|e| fixture_err(format!("line {}: {e}", n + 1)))?,
            );
        }
        Ok(Self::from_records(records))
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl QuestionGenerator for RecordedGenerator {
    fn identity(&self) -> &str {
        "recorded"
    }

    fn generate_raw(&self, request: &GenerationRequest) -> Result<Vec<String>, GenerateError> {
        self.table
            .get(&request.key())
            .cloned()
            .ok_or_else(|| GenerateError::Unavailable(format!("no recording for {:?}", request.context)))
    }
}

/// Passes requests to `inner` and appends each successful response to a
/// fixture file.
pub struct RecordingGenerator<G> {
    inner: G,
    out: Mutex<File>,
}

impl<G: QuestionGenerator> RecordingGenerator<G> {
    pub fn new(inner: G, path: &Path) -> std::io::Result<Self> {
        let out = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            inner,
            out: Mutex::new(out),
        })
    }
}

impl<G: QuestionGenerator> QuestionGenerator for RecordingGenerator<G> {
    fn identity(&self) -> &str {
        self.inner.identity()
    }

    fn is_deterministic(&self) -> bool {
        self.inner.is_deterministic()
    }

    fn generate_raw(&self, request: &GenerationRequest) -> Result<Vec<String>, GenerateError> {
        let candidates = self.inner.generate_raw(request)?;
        let record = RecordedGeneration {
            context: request.context.clone(),
            answer: request.answer.clone(),
            candidates: candidates.clone(),
        };
        let line = serde_json::to_string(&record).expect("record serializes");
        let mut f = self.out.lock().expect("recording file poisoned");
        if let Err(e) = writeln!(f, "{line}") {
            log::warn!("could not record generation: {e}");
        }
        Ok(candidates)
    }
}

/// Hosted text2text model: POSTs `{"inputs": prompt, "parameters": {...}}`
/// and reads `[{"generated_text": ...}]` or a plain string array.
pub struct HttpGenerator {
    identity: String,
    prompt: String,
    client: HttpClient,
}

impl HttpGenerator {
    pub fn new(identity: impl Into<String>, prompt: impl Into<String>, client: HttpClient) -> Self {
        Self {
            identity: identity.into(),
            prompt: prompt.into(),
            client,
        }
    }
}

fn generated_texts(body: &serde_json::Value) -> Vec<String> {
    let items = match body {
        serde_json::Value::Array(items) => items.as_slice(),
        other => std::slice::from_ref(other),
    };
    items
        .iter()
        .filter_map(|item| match item {
            serde_json::Value::String(s) => Some(s.clone()),
            serde_json::Value::Object(map) => map.get("generated_text").and_then(|v| v.as_str()).map(String::from),
            _ => None,
        })
        .collect()
}

impl QuestionGenerator for HttpGenerator {
    fn identity(&self) -> &str {
        &self.identity
    }

    // beam search is deterministic but hosted models may change underneath
    fn is_deterministic(&self) -> bool {
        false
    }

    fn generate_raw(&self, request: &GenerationRequest) -> Result<Vec<String>, GenerateError> {
        let body = serde_json::json!({
            "inputs": render_prompt(&self.prompt, request),
            "parameters": {
                "num_beams": request.n.max(1),
                "num_return_sequences": request.n.max(1),
                "max_length": 72
            }
        });
        let value: serde_json::Value = self
            .client
            .post_json(&body)
            .map_err(|e| GenerateError::Unavailable(e.to_string()))?;
        Ok(generated_texts(&value))
    }
}

/// Counting gate bounding concurrent calls into a backend.
pub struct InFlightLimit {
    max: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

impl InFlightLimit {
    pub fn new(max: usize) -> Self {
        Self {
            max: max.max(1),
            active: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut active = self.active.lock().expect("gate poisoned");
            while *active >= self.max {
                active = self.freed.wait(active).expect("gate poisoned");
            }
            *active += 1;
        }
        struct Release<'a>(&'a InFlightLimit);
        impl Drop for Release<'_> {
            fn drop(&mut self) {
                *self.0.active.lock().expect("gate poisoned") -= 1;
                self.0.freed.notify_one();
            }
        }
        let _release = Release(self);
        f()
    }
}

/// A backend behind an [`InFlightLimit`].
pub struct Bounded<G> {
    inner: G,
    gate: InFlightLimit,
}

impl<G> Bounded<G> {
    pub fn new(inner: G, max_in_flight: usize) -> Self {
        Self {
            inner,
            gate: InFlightLimit::new(max_in_flight),
        }
    }
}

impl<G: QuestionGenerator> QuestionGenerator for Bounded<G> {
    fn identity(&self) -> &str {
        self.inner.identity()
    }

    fn is_deterministic(&self) -> bool {
        self.inner.is_deterministic()
    }

    fn generate_raw(&self, request: &GenerationRequest) -> Result<Vec<String>, GenerateError> {
        self.gate.run(|| self.inner.generate_raw(request))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    const CTX: &str = "desert plants have scale/spine-like leaves to reduce the loss of water by transpiration";
    const ANS: &str = "reduce the loss of water by transpiration";

    fn texts(c: &[CandidateSubjectiveQuestion]) -> Vec<&str> {
        c.iter().map(|c| c.text.as_str()).collect()
    }

    #[test]
    fn zero_requested() {
        let stub = StubGenerator::new();
        assert!(generate(&GenerationRequest::new("", "", 0), &stub).is_empty());
    }

    #[test]
    fn stub_returns_table_entry() {
        let mut stub = StubGenerator::new();
        stub.insert("ctx", "ans", vec!["Q one?".into(), "Q two?".into()]);
        let out = generate(&GenerationRequest::new("ctx", "ans", 3), &stub);
        assert_eq!(texts(&out), ["Q one?", "Q two?"]);
        assert!(out.iter().all(|c| c.provenance == Provenance::Neural));
    }

    #[test]
    fn shaping_strips_labels_and_duplicates() {
        let mut stub = StubGenerator::new();
        stub.insert(
            "c",
            "a",
            vec![
                "question: Why do leaves fall".into(),
                "why do leaves fall?".into(),
                "  ".into(),
                "Question: What is a leaf?".into(),
                "What is a stem?".into(),
            ],
        );
        let out = generate(&GenerationRequest::new("c", "a", 2), &stub);
        assert_eq!(texts(&out), ["Why do leaves fall?", "What is a leaf?"]);

        stub.insert("c", "b", vec!["question: what causes rain".into()]);
        let out = generate(&GenerationRequest::new("c", "b", 1), &stub);
        assert_eq!(texts(&out), ["What causes rain?"]);
    }

    #[test]
    fn failures_degrade_to_empty() {
        let stub = StubGenerator::new();
        assert!(generate(&GenerationRequest::new("c", "a", 3), &stub).is_empty());
        assert_eq!(
            GenerationRequest::new(" ", "a", 1).validate(),
            Err(GenerateError::EmptyContext)
        );
    }

    #[test]
    fn recording_round_trips_through_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.jsonl");
        let mut stub = StubGenerator::new();
        stub.insert(
            CTX,
            ANS,
            vec![
                "How do desert plants reduce water loss?".into(),
                "Why do desert plants have spines?".into(),
            ],
        );
        let req = GenerationRequest::new(CTX, ANS, 3);
        let live = generate(&req, &RecordingGenerator::new(stub, &path).unwrap());
        let replay = RecordedGenerator::load(&path).unwrap();
        assert_eq!(replay.len(), 1);
        let a = generate(&req, &replay);
        let b = generate(&req, &replay);
        assert_eq!(a, live);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn prompt_template() {
        let req = GenerationRequest::new("Q  text", "A", 1);
        assert_eq!(render_prompt(DEFAULT_PROMPT, &req), "context: Q text answer: A");
    }

    #[test]
    fn reads_hosted_response_shapes() {
        let objs = serde_json::json!([{"generated_text": "question: What?"}, {"x": 1}]);
        assert_eq!(generated_texts(&objs), ["question: What?"]);
        assert_eq!(generated_texts(&serde_json::json!(["a", "b"])), ["a", "b"]);
        assert_eq!(generated_texts(&serde_json::json!({"generated_text": "c"})), ["c"]);
    }

    struct Slow {
        active: Arc<AtomicUsize>,
        peak: Arc<AtomicUsize>,
    }

    impl QuestionGenerator for Slow {
        fn identity(&self) -> &str {
            "slow"
        }
        fn generate_raw(&self, _: &GenerationRequest) -> Result<Vec<String>, GenerateError> {
            let now = self.active.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(std::time::Duration::from_millis(5));
            self.active.fetch_sub(1, Ordering::SeqCst);
            Ok(vec!["Why?".into()])
        }
    }

    #[test]
    fn in_flight_bound_is_respected() {
        let peak = Arc::new(AtomicUsize::new(0));
        let g = Arc::new(Bounded::new(
            Slow { active: Arc::new(AtomicUsize::new(0)), peak: peak.clone() },
            2,
        ));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let g = g.clone();
                std::thread::spawn(move || generate(&GenerationRequest::new("c", "a", 1), &*g))
            })
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap().len(), 1);
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }

    proptest! {
        #[test]
        fn output_bounded_and_unique(
            raw in proptest::collection::vec("[A-Za-z ]{0,12}\\??", 0..12),
            n in 0usize..6,
        ) {
            let mut stub = StubGenerator::new();
            stub.insert("c", "a", raw);
            let out = generate(&GenerationRequest::new("c", "a", n), &stub);
            prop_assert!(out.len() <= n);
            let folded: HashSet<String> = out.iter().map(|c| fold(&c.text)).collect();
            prop_assert_eq!(folded.len(), out.len());
            prop_assert!(out.iter().all(|c| c.text.ends_with('?')));
        }
    }
}
