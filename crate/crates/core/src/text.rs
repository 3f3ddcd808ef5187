//! Text normalization, word-level tokenization and the record types shared by
//! every stage of the pipeline.
//!
//! Tokens are whitespace-delimited words with trailing sentence punctuation
//! (`. , ; : ? !`) split off into their own tokens. Internal hyphens and
//! slashes stay inside a word, so `scale/spine-like` is a single token.
//!
//! Case is preserved everywhere; use [`fold`] for comparisons.

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

const TERMINAL_PUNCTUATION: &[char] = &['.', ',', ';', ':', '?', '!'];

fn is_terminal_punct(c: char) -> bool {
    TERMINAL_PUNCTUATION.contains(&c)
}

/// True when every character of `token` is terminal punctuation.
pub fn is_punctuation(token: &str) -> bool {
    !token.is_empty() && token.chars().all(is_terminal_punct)
}

/// Case-folded view used for all comparisons.
pub fn fold(s: &str) -> String {
    s.to_lowercase()
}

/// Canonicalizes raw input text.
///
/// Applies NFC, collapses whitespace runs to a single space, trims both ends,
/// and removes the space in front of a free-standing punctuation run
/// (`"what ?"` becomes `"what?"`). Idempotent.
pub fn normalize(text: &str) -> String {
    let composed: String = text.nfc().collect();
    let mut out = String::with_capacity(composed.len());
    for word in composed.split_whitespace() {
        if !out.is_empty() && !is_punctuation(word) {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Splits normalized text into word and punctuation tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let body = word.trim_end_matches(is_terminal_punct);
        if !body.is_empty() {
            tokens.push(body.to_string());
        }
        tokens.extend(word[body.len()..].chars().map(String::from));
    }
    tokens
}

/// Joins tokens with single spaces, gluing punctuation tokens onto the
/// preceding token. Inverse of [`tokenize`] on normalized text.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for token in tokens {
        let token = token.as_ref();
        if !out.is_empty() && !is_punctuation(token) {
            out.push(' ');
        }
        out.push_str(token);
    }
    out
}

/// Fill-in-the-blank marker such as `____`.
pub fn is_blank(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| c == '_')
}

/// Word tokens only; punctuation and blank markers removed.
pub fn words<S: AsRef<str>>(tokens: &[S]) -> impl Iterator<Item = &str> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !is_punctuation(t) && !is_blank(t))
}

pub const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "all", "also", "am", "an", "and", "any", "are", "as",
    "at", "be", "because", "been", "before", "being", "below", "between", "both", "but", "by",
    "can", "could", "did", "do", "does", "doing", "during", "each", "few", "for", "from",
    "further", "had", "has", "have", "having", "he", "her", "here", "hers", "him", "his", "how",
    "i", "if", "in", "into", "is", "it", "its", "itself", "just", "may", "me", "might", "more",
    "most", "must", "my", "no", "nor", "not", "of", "off", "on", "once", "only", "or", "other",
    "our", "ours", "out", "over", "own", "same", "shall", "she", "should", "so", "some", "such",
    "than", "that", "the", "their", "theirs", "them", "then", "there", "these", "they", "this",
    "those", "through", "to", "too", "under", "until", "up", "very", "was", "we", "were", "what",
    "when", "where", "which", "while", "who", "whom", "whose", "why", "will", "with", "would",
    "you", "your",
];

pub fn is_stopword(folded: &str) -> bool {
    STOPWORDS.binary_search(&folded).is_ok()
}

/// Case-folded word tokens of `text` that are not stopwords.
pub fn content_words(text: &str) -> Vec<String> {
    let tokens = tokenize(&normalize(text));
    words(&tokens)
        .map(fold)
        .filter(|w| !is_stopword(w))
        .collect()
}

/// Upper-cases the first character of `s`.
pub fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Makes `text` end in exactly one `?`, replacing any trailing sentence
/// punctuation.
pub fn as_question(text: &str) -> String {
    let trimmed = normalize(text);
    let body = trimmed.trim_end_matches(|c: char| is_terminal_punct(c) || c.is_whitespace());
    format!("{body}?")
}

/// An objective question. Tokens are derived from the text on construction
/// and never mutated independently.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectiveQuestion {
    id: String,
    text: String,
    tokens: Vec<String>,
    subject_tag: Option<String>,
}

impl ObjectiveQuestion {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&normalize(&text));
        Self {
            id: id.into(),
            text,
            tokens,
            subject_tag: None,
        }
    }

    pub fn with_subject(mut self, subject: impl Into<String>) -> Self {
        self.subject_tag = Some(subject.into());
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Raw text as supplied.
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn normalized(&self) -> String {
        normalize(&self.text)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn subject_tag(&self) -> Option<&str> {
        self.subject_tag.as_deref()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// The answer to an objective question. An empty answer marks the record as
/// answerless, which excludes it from declarative conversion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerKey {
    text: String,
    tokens: Vec<String>,
}

impl AnswerKey {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&normalize(&text));
        Self { text, tokens }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn normalized(&self) -> String {
        normalize(&self.text)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_empty(&self) -> bool {
        words(&self.tokens).next().is_none()
    }
}

/// Which component produced a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Template,
    KnowledgeBase,
    Neural,
}

impl Provenance {
    /// Tie-break priority; lower wins.
    pub fn priority(self) -> u8 {
        match self {
            Provenance::Template => 0,
            Provenance::KnowledgeBase => 1,
            Provenance::Neural => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSubjectiveQuestion {
    pub text: String,
    pub provenance: Provenance,
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_query: Option<String>,
}

impl CandidateSubjectiveQuestion {
    /// Builds an unscored candidate; the text is normalized and forced to end
    /// with a single `?`.
    pub fn new(text: &str, provenance: Provenance) -> Self {
        Self {
            text: as_question(text),
            provenance,
            score: None,
            source_query: None,
        }
    }

    pub fn with_source_query(mut self, query: impl Into<String>) -> Self {
        self.source_query = Some(query.into());
        self
    }

    /// Sets the score, clamped to [-1, 1].
    pub fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score.clamp(-1.0, 1.0));
        self
    }
}

/// One line of the input corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub question: String,
    #[serde(default)]
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Vec<String>>,
}

impl CorpusRecord {
    pub fn question(&self) -> ObjectiveQuestion {
        let q = ObjectiveQuestion::new(&self.id, &self.question);
        match &self.subject {
            Some(s) => q.with_subject(s),
            None => q,
        }
    }

    pub fn answer(&self) -> AnswerKey {
        AnswerKey::new(&self.answer)
    }
}
