//! Three-way routing of objective questions.
//!
//! Precedence is fixed: a multi-option phrase anywhere in the question wins,
//! then a wh-word in first position, and everything else is treated as a
//! declarative stem that becomes a full sentence once the answer is appended.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{fold, normalize, tokenize, words, ObjectiveQuestion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CategoryLabel {
    MultiOptionDependent,
    WhWord,
    DeclarativeSentence,
}

impl CategoryLabel {
    pub const ALL: [CategoryLabel; 3] = [
        CategoryLabel::MultiOptionDependent,
        CategoryLabel::WhWord,
        CategoryLabel::DeclarativeSentence,
    ];
}

impl fmt::Display for CategoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CategoryLabel::MultiOptionDependent => "MultiOptionDependent",
            CategoryLabel::WhWord => "WhWord",
            CategoryLabel::DeclarativeSentence => "DeclarativeSentence",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("record {0:?} has no tokens after normalization")]
    EmptyQuestion(String),
    #[error("cannot build a histogram of an empty corpus")]
    EmptyCorpus,
    #[error("invalid classifier config: {0}")]
    InvalidConfig(String),
}

pub const DEFAULT_MULTI_OPTION_PHRASES: &[&str] = &[
    "of the following",
    "choose the statement",
    "choose the correct",
    "which of these",
    "all of the above",
];

pub const DEFAULT_WH_WORDS: &[&str] = &[
    "what", "which", "who", "whom", "whose", "where", "when", "why", "how",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub multi_option_phrases: Vec<String>,
    pub wh_words: Vec<String>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            multi_option_phrases: DEFAULT_MULTI_OPTION_PHRASES.iter().map(|s| s.to_string()).collect(),
            wh_words: DEFAULT_WH_WORDS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        if self.multi_option_phrases.is_empty() || self.wh_words.is_empty() {
            return Err(ClassifyError::InvalidConfig(
                "phrase and wh-word lists must be non-empty".into(),
            ));
        }
        if let Some(p) = self
            .multi_option_phrases
            .iter()
            .chain(&self.wh_words)
            .find(|p| p.trim() != p.as_str() || p.is_empty())
        {
            return Err(ClassifyError::InvalidConfig(format!(
                "entry {p:?} is empty or has surrounding whitespace"
            )));
        }
        Ok(())
    }

    fn phrase_tokens(&self) -> impl Iterator<Item = Vec<String>> + '_ {
        self.multi_option_phrases
            .iter()
            .map(|p| tokenize(&normalize(&fold(p))))
    }
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

pub fn classify(
    question: &ObjectiveQuestion,
    config: &ClassifierConfig,
) -> Result<CategoryLabel, ClassifyError> {
    if question.is_empty() {
        return Err(ClassifyError::EmptyQuestion(question.id().to_string()));
    }
    let folded: Vec<String> = question.tokens().iter().map(|t| fold(t)).collect();
    if config.phrase_tokens().any(|p| contains_run(&folded, &p)) {
        return Ok(CategoryLabel::MultiOptionDependent);
    }
    let first = words(&folded).next();
    if first.is_some_and(|w| config.wh_words.iter().any(|wh| fold(wh) == w)) {
        return Ok(CategoryLabel::WhWord);
    }
    Ok(CategoryLabel::DeclarativeSentence)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryHistogram {
    counts: BTreeMap<CategoryLabel, usize>,
    total: usize,
}

impl CategoryHistogram {
    pub fn count(&self, label: CategoryLabel) -> usize {
        self.counts.get(&label).copied().unwrap_or(0)
    }

    pub fn fraction(&self, label: CategoryLabel) -> f64 {
        self.count(label) as f64 / self.total as f64
    }

    pub fn total(&self) -> usize {
        self.total
    }
}

/// Counts categories over a corpus. Every question must be non-empty.
pub fn category_histogram<'a, I>(
    corpus: I,
    config: &ClassifierConfig,
) -> Result<CategoryHistogram, ClassifyError>
where
    I: IntoIterator<Item = &'a ObjectiveQuestion>,
{
    let mut counts = BTreeMap::new();
    let mut total = 0;
    for q in corpus {
        *counts.entry(classify(q, config)?).or_insert(0) += 1;
        total += 1;
    }
    if total == 0 {
        return Err(ClassifyError::EmptyCorpus);
    }
    Ok(CategoryHistogram { counts, total })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(text: &str) -> ObjectiveQuestion {
        ObjectiveQuestion::new("t", text)
    }

    #[test]
    fn classifies_examples() {
        let cfg = ClassifierConfig::default();
        assert_eq!(
            classify(&q("Which of the following is a metal"), &cfg),
            Ok(CategoryLabel::MultiOptionDependent)
        );
        assert_eq!(
            classify(&q("What kind of wastes can choke the drains?"), &cfg),
            Ok(CategoryLabel::WhWord)
        );
        assert_eq!(
            classify(&q("The chemical symbol for silver is"), &cfg),
            Ok(CategoryLabel::DeclarativeSentence)
        );
    }

    #[test]
    fn phrase_check_precedes_wh_check() {
        let cfg = ClassifierConfig::default();
        assert_eq!(
            classify(&q("What OF THE following statements is true?"), &cfg),
            Ok(CategoryLabel::MultiOptionDependent)
        );
    }

    #[test]
    fn phrases_match_whole_tokens_only() {
        let cfg = ClassifierConfig::default();
        // "of theme followings" contains the characters but not the tokens
        assert_eq!(
            classify(&q("Sounds of theme followings are"), &cfg),
            Ok(CategoryLabel::DeclarativeSentence)
        );
    }

    #[test]
    fn empty_question_is_rejected() {
        let cfg = ClassifierConfig::default();
        assert_eq!(
            classify(&q("   "), &cfg),
            Err(ClassifyError::EmptyQuestion("t".into()))
        );
    }

    #[test]
    fn histogram_of_three_examples() {
        let cfg = ClassifierConfig::default();
        let corpus = [
            q("Which of the following is a metal"),
            q("What kind of wastes can choke the drains?"),
            q("The chemical symbol for silver is"),
        ];
        let h = category_histogram(&corpus, &cfg).unwrap();
        for label in CategoryLabel::ALL {
            assert_eq!(h.count(label), 1);
            assert!((h.fraction(label) - 1.0 / 3.0).abs() < 1e-12);
        }
        let single = category_histogram([&q("Why is the sky blue?")], &cfg).unwrap();
        assert_eq!(single.fraction(CategoryLabel::WhWord), 1.0);
    }

    #[test]
    fn histogram_of_empty_corpus_fails() {
        let cfg = ClassifierConfig::default();
        let empty: Vec<ObjectiveQuestion> = vec![];
        assert_eq!(
            category_histogram(&empty, &cfg),
            Err(ClassifyError::EmptyCorpus)
        );
    }

    #[test]
    fn config_validation() {
        assert!(ClassifierConfig::default().validate().is_ok());
        let bad = ClassifierConfig {
            multi_option_phrases: vec![" of the following".into()],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let empty = ClassifierConfig {
            wh_words: vec![],
            ..Default::default()
        };
        assert!(empty.validate().is_err());
    }
}
