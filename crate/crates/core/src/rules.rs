//! Rule templates that turn a declarative stem plus its answer into a short
//! wh-question.
//!
//! The generic template appends the answer to the stem, picks a wh-word from
//! the answer's entity type, drops the answer, inverts subject and auxiliary
//! (or inserts do-support) in what remains, fronts the wh-word and closes
//! with `?`. Two cluster-bound specializations narrow the wh choice: one for
//! passive stems ending in `by`, one for copular stems ending in a form of
//! `be`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{AnnotateError, Annotation, Annotator, EntityType, Pos};
use crate::clusters::{Cluster, ClusterKey};
use crate::text::{
    as_question, capitalize, detokenize, fold, is_blank, is_punctuation, normalize, tokenize,
    AnswerKey, CandidateSubjectiveQuestion, ObjectiveQuestion, Provenance,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("question stem is empty")]
    EmptyQuestion,
    #[error("answer is empty")]
    EmptyAnswer,
    #[error("question has a blank before its end; appending the answer would not form a sentence")]
    InteriorBlank,
    #[error(transparent)]
    Annotation(#[from] AnnotateError),
    #[error("no finite verb found")]
    NoFiniteVerb,
    #[error("annotation tokens do not match the sentence")]
    TokenMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateId {
    Generic,
    PassiveAgent,
    Copula,
}

const COPULA_FORMS: &[&str] = &["is", "are", "was", "were"];

/// Static binding from a cluster key to its template.
pub fn template_for_key(key: &ClusterKey) -> TemplateId {
    match key {
        ClusterKey::FirstToken(_) => TemplateId::Generic,
        _ if key.last() == "by" => TemplateId::PassiveAgent,
        _ if COPULA_FORMS.contains(&key.last()) => TemplateId::Copula,
        _ => TemplateId::Generic,
    }
}

/// How a template maps the answer to a wh-phrase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WhPolicy {
    /// Full entity table, see [`select_wh_word`].
    Entity,
    /// Agents: people and organizations get `who`, anything else `what`.
    Agent,
    /// Copular complements: `who`, `when`, otherwise `what`.
    Copular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    SelectWh,
    Invert,
    /// Drops a stem-final preposition after `when`/`where`.
    DropStrandedPreposition,
    Punctuate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Template {
    pub id: TemplateId,
    pub wh: WhPolicy,
    pub steps: &'static [Step],
}

pub const GENERIC: Template = Template {
    id: TemplateId::Generic,
    wh: WhPolicy::Entity,
    steps: &[Step::SelectWh, Step::Invert, Step::DropStrandedPreposition, Step::Punctuate],
};

pub const PASSIVE_AGENT: Template = Template {
    id: TemplateId::PassiveAgent,
    wh: WhPolicy::Agent,
    steps: &[Step::SelectWh, Step::Invert, Step::Punctuate],
};

pub const COPULA: Template = Template {
    id: TemplateId::Copula,
    wh: WhPolicy::Copular,
    steps: &[Step::SelectWh, Step::Invert, Step::Punctuate],
};

impl Template {
    pub fn get(id: TemplateId) -> &'static Template {
        match id {
            TemplateId::Generic => &GENERIC,
            TemplateId::PassiveAgent => &PASSIVE_AGENT,
            TemplateId::Copula => &COPULA,
        }
    }

    /// Whether the template fits the annotated question stem.
    pub fn applies(&self, stem: &Annotation) -> bool {
        let Some(main) = stem.main_verb_index else {
            return false;
        };
        match self.id {
            TemplateId::Generic => true,
            TemplateId::PassiveAgent => {
                let ends_in_by = stem.tokens.last().is_some_and(|t| fold(t) == "by");
                let be_aux = stem.auxiliary_indices.iter().any(|&i| stem.lemmas[i] == "be");
                ends_in_by && be_aux && stem.pos_tags[main] == Pos::VBN
            }
            TemplateId::Copula => stem.lemmas[main] == "be" && stem.auxiliary_indices == [main],
        }
    }
}

/// Question stem and answer as token lists: trailing punctuation and blank
/// markers are removed from the stem, surrounding punctuation from the answer.
fn declarative_parts(
    question: &ObjectiveQuestion,
    answer: &AnswerKey,
) -> Result<(Vec<String>, Vec<String>), RuleError> {
    let mut stem = question.tokens().to_vec();
    while stem.last().is_some_and(|t| is_punctuation(t) || is_blank(t)) {
        stem.pop();
    }
    if stem.is_empty() {
        return Err(RuleError::EmptyQuestion);
    }
    if stem.iter().any(|t| is_blank(t)) {
        return Err(RuleError::InteriorBlank);
    }
    let a = answer.tokens();
    let start = a.iter().position(|t| !is_punctuation(t)).unwrap_or(a.len());
    let end = a.iter().rposition(|t| !is_punctuation(t)).map_or(start, |i| i + 1);
    if start >= end {
        return Err(RuleError::EmptyAnswer);
    }
    Ok((stem, a[start..end].to_vec()))
}

/// The question stem with the answer appended, without a final period.
pub fn to_declarative(question: &ObjectiveQuestion, answer: &AnswerKey) -> Result<String, RuleError> {
    let (mut tokens, answer_tokens) = declarative_parts(question, answer)?;
    tokens.extend(answer_tokens);
    Ok(detokenize(&tokens))
}

/// Index range of the first item of a list answer ("used tea leaves, cotton"
/// -> "used tea leaves").
fn first_item(answer: &Annotation) -> std::ops::Range<usize> {
    let end = answer
        .tokens
        .iter()
        .enumerate()
        .position(|(i, t)| i > 0 && (t == "," || answer.pos_tags[i] == Pos::CC))
        .unwrap_or(answer.len());
    0..end.max(1).min(answer.len())
}

fn answer_entity(answer: &Annotation) -> EntityType {
    let item = first_item(answer);
    answer
        .entity_spans
        .iter()
        .find(|s| s.start < item.end && item.start < s.end)
        .map_or(EntityType::Other, |s| s.entity)
}

/// Wh-word for an answer from its entity type. Quantities pick `how many`
/// for plural or bare counts and `how much` for mass nouns.
pub fn select_wh_word(answer: &Annotation) -> &'static str {
    match answer_entity(answer) {
        EntityType::Person => "who",
        EntityType::Location => "where",
        EntityType::DateTime => "when",
        EntityType::Quantity => {
            let item = first_item(answer);
            let tags = &answer.pos_tags[item];
            if tags.contains(&Pos::NNS) || !tags.contains(&Pos::NN) {
                "how many"
            } else {
                "how much"
            }
        }
        EntityType::Organization | EntityType::Other => "what",
    }
}

fn wh_phrase(policy: WhPolicy, answer: &Annotation) -> Vec<String> {
    let word = match (policy, answer_entity(answer)) {
        (WhPolicy::Entity, _) => select_wh_word(answer),
        (WhPolicy::Agent, EntityType::Person | EntityType::Organization) => "who",
        (WhPolicy::Agent, _) => "what",
        (WhPolicy::Copular, EntityType::Person) => "who",
        (WhPolicy::Copular, EntityType::DateTime) => "when",
        (WhPolicy::Copular, _) => "what",
    };
    let mut phrase: Vec<String> = word.split(' ').map(String::from).collect();
    if word.starts_with("how ") {
        // "how many" takes the counted noun: 206 bones -> how many bones
        let item = first_item(answer);
        if let Some(last_num) = item.clone().rev().find(|&i| answer.pos_tags[i] == Pos::CD) {
            phrase.extend(
                (last_num + 1..item.end)
                    .filter(|&i| matches!(answer.pos_tags[i], Pos::NN | Pos::NNS | Pos::JJ))
                    .map(|i| answer.tokens[i].clone()),
            );
        }
    }
    phrase
}

fn keeps_capital(annotation: &Annotation, index: usize) -> bool {
    let token = &annotation.tokens[index];
    let uppercase = token.chars().filter(|c| c.is_uppercase()).count();
    annotation.pos_tags[index].is_proper()
        || annotation.entity_at(index).is_some()
        || token == "I"
        || (uppercase >= 2 && !token.chars().any(char::is_lowercase))
}

fn do_form(tag: Pos) -> &'static str {
    match tag {
        Pos::VBD | Pos::VBN => "did",
        Pos::VBZ => "does",
        _ => "do",
    }
}

fn invert_tokens(annotation: &Annotation) -> Result<Vec<String>, RuleError> {
    let tokens = &annotation.tokens;
    let mut subject_first = tokens.first().cloned().unwrap_or_default();
    if !keeps_capital(annotation, 0) {
        subject_first = fold(&subject_first[..1]) + &subject_first[1..];
    }
    let subject = |end: usize| -> Vec<String> {
        let mut s = tokens[..end].to_vec();
        if let Some(first) = s.first_mut() {
            *first = subject_first.clone();
        }
        s
    };
    if let Some(&aux) = annotation.auxiliary_indices.first() {
        let mut out = vec![fold(&tokens[aux])];
        out.extend(subject(aux));
        out.extend_from_slice(&tokens[aux + 1..]);
        return Ok(out);
    }
    let main = annotation.main_verb_index.ok_or(RuleError::NoFiniteVerb)?;
    if !annotation.pos_tags[main].is_verb() {
        return Err(RuleError::NoFiniteVerb);
    }
    let mut out = vec![do_form(annotation.pos_tags[main]).to_string()];
    out.extend(subject(main));
    out.push(annotation.lemmas[main].clone());
    out.extend_from_slice(&tokens[main + 1..]);
    Ok(out)
}

/// Fronts the first auxiliary or copula before the subject; with no
/// auxiliary, inserts a tense-matched `do`/`does`/`did` and replaces the
/// main verb by its lemma. The former first word is lower-cased unless it
/// is a proper noun, an entity or an acronym.
pub fn subject_aux_inversion(declarative: &str, annotation: &Annotation) -> Result<String, RuleError> {
    if tokenize(&normalize(declarative)) != annotation.tokens {
        return Err(RuleError::TokenMismatch);
    }
    invert_tokens(annotation).map(|t| detokenize(&t))
}

/// Rule-based converter bound to an annotation backend.
#[derive(Clone)]
pub struct RuleTransformer {
    annotator: Arc<dyn Annotator>,
}

impl RuleTransformer {
    pub fn new(annotator: Arc<dyn Annotator>) -> Self {
        Self { annotator }
    }

    pub fn annotate(&self, sentence: &str) -> Result<Annotation, RuleError> {
        if normalize(sentence).is_empty() {
            return Err(AnnotateError::EmptyInput.into());
        }
        Ok(self.annotator.annotate(sentence)?)
    }

    /// Converts a declarative stem and its answer into a template candidate.
    /// A bound cluster picks the template; when that template does not fit
    /// the stem the generic one is used.
    pub fn transform(
        &self,
        question: &ObjectiveQuestion,
        answer: &AnswerKey,
        cluster: Option<&Cluster>,
    ) -> Result<CandidateSubjectiveQuestion, RuleError> {
        let (stem_tokens, answer_tokens) = declarative_parts(question, answer)?;
        let split = stem_tokens.len();
        let mut all = stem_tokens;
        all.extend(answer_tokens);
        let full = self.annotate(&detokenize(&all))?;
        if full.tokens != all {
            return Err(RuleError::TokenMismatch);
        }
        let stem = full.slice(0..split);
        let answer_ann = full.slice(split..full.len());

        let bound = Template::get(cluster.map_or(TemplateId::Generic, |c| c.template_id));
        let template = if bound.applies(&stem) { bound } else { &GENERIC };

        let mut wh = Vec::new();
        let mut body = Vec::new();
        for step in template.steps {
            match step {
                Step::SelectWh => wh = wh_phrase(template.wh, &answer_ann),
                Step::Invert => body = invert_tokens(&stem)?,
                Step::DropStrandedPreposition => {
                    let locative = matches!(wh.first().map(String::as_str), Some("when" | "where"));
                    let stranded = stem.pos_tags.last() == Some(&Pos::IN);
                    if locative && stranded && body.len() > 1 {
                        body.pop();
                    }
                }
                Step::Punctuate => {}
            }
        }
        let mut words = wh;
        words.extend(body);
        let text = as_question(&capitalize(&detokenize(&words)));
        Ok(CandidateSubjectiveQuestion::new(&text, Provenance::Template))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::{EntitySpan, LexiconAnnotator};

    fn engine() -> RuleTransformer {
        RuleTransformer::new(Arc::new(LexiconAnnotator::english()))
    }

    fn convert(q: &str, a: &str) -> Result<String, RuleError> {
        engine()
            .transform(&ObjectiveQuestion::new("t", q), &AnswerKey::new(a), None)
            .map(|c| c.text)
    }

    fn hand_annotation(tokens: &[&str], tags: &[Pos], lemmas: &[&str]) -> Annotation {
        Annotation::new(
            tokens.iter().map(|s| s.to_string()).collect(),
            tags.to_vec(),
            lemmas.iter().map(|s| s.to_string()).collect(),
            vec![],
        )
    }

    #[test]
    fn declarative_examples() {
        let q = |s| ObjectiveQuestion::new("t", s);
        assert_eq!(
            to_declarative(&q("The chemical symbol for silver is"), &AnswerKey::new("Ag")).unwrap(),
            "The chemical symbol for silver is Ag"
        );
        assert_eq!(
            to_declarative(&q("Polio is caused by"), &AnswerKey::new("a virus.")).unwrap(),
            "Polio is caused by a virus"
        );
        assert_eq!(
            to_declarative(&q("X is"), &AnswerKey::new("")),
            Err(RuleError::EmptyAnswer)
        );
        assert_eq!(
            to_declarative(&q("Polio is caused by ____."), &AnswerKey::new("a virus")).unwrap(),
            "Polio is caused by a virus"
        );
        assert_eq!(
            to_declarative(&q("____ is a metal"), &AnswerKey::new("Iron")),
            Err(RuleError::InteriorBlank)
        );
    }

    #[test]
    fn wh_word_table() {
        let lex = LexiconAnnotator::english();
        let wh = |s: &str| select_wh_word(&lex.annotate(s).unwrap());
        assert_eq!(wh("Ag"), "what");
        assert_eq!(wh("1947"), "when");
        assert_eq!(wh("Marie Curie"), "who");
        assert_eq!(wh("Delhi"), "where");
        assert_eq!(wh("206 bones"), "how many");
        assert_eq!(wh("two litres of water"), "how many");
        assert_eq!(wh("5 kilogram"), "how much");
        assert_eq!(wh("ISRO"), "what");
    }

    #[test]
    fn list_answers_use_first_item() {
        let lex = LexiconAnnotator::english();
        assert_eq!(select_wh_word(&lex.annotate("Newton, the rock").unwrap()), "who");
        assert_eq!(select_wh_word(&lex.annotate("used tea leaves, Newton").unwrap()), "what");
    }

    #[test]
    fn inversion_fronts_copula() {
        // hand-built tags: "Polio" as a proper name keeps its capital
        let a = hand_annotation(
            &["Polio", "is", "caused", "by", "a", "virus"],
            &[Pos::NNP, Pos::VBZ, Pos::VBN, Pos::IN, Pos::DT, Pos::NN],
            &["polio", "be", "cause", "by", "a", "virus"],
        );
        assert_eq!(
            subject_aux_inversion("Polio is caused by a virus", &a).unwrap(),
            "is Polio caused by a virus"
        );
    }

    #[test]
    fn inversion_inserts_do_support() {
        let lex = LexiconAnnotator::english();
        let s = "The liver produces bile";
        let a = lex.annotate(s).unwrap();
        assert_eq!(subject_aux_inversion(s, &a).unwrap(), "does the liver produce bile");
        let s = "Newton discovered gravity";
        let a = lex.annotate(s).unwrap();
        assert_eq!(subject_aux_inversion(s, &a).unwrap(), "did Newton discover gravity");
        let s = "Plants make food";
        let a = lex.annotate(s).unwrap();
        assert_eq!(subject_aux_inversion(s, &a).unwrap(), "do plants make food");
    }

    #[test]
    fn inversion_without_verb_fails() {
        let lex = LexiconAnnotator::english();
        let a = lex.annotate("Blue sky").unwrap();
        assert_eq!(subject_aux_inversion("Blue sky", &a), Err(RuleError::NoFiniteVerb));
        assert_eq!(subject_aux_inversion("Red sky", &a), Err(RuleError::TokenMismatch));
    }

    #[test]
    fn transform_examples() {
        assert_eq!(
            convert("The chemical symbol for silver is", "Ag").unwrap(),
            "What is the chemical symbol for silver?"
        );
        assert_eq!(
            convert("The wastes that can choke the drains include", "used tea leaves, cotton").unwrap(),
            "What do the wastes that can choke the drains include?"
        );
        assert_eq!(convert("Polio is caused by", "a virus").unwrap(), "What is polio caused by?");
    }

    #[test]
    fn transform_with_bound_templates() {
        let e = engine();
        let cluster = |key: ClusterKey| Cluster {
            template_id: template_for_key(&key),
            key,
            frequency: 3,
        };
        let by = cluster(ClusterKey::LastToken("by".into()));
        assert_eq!(by.template_id, TemplateId::PassiveAgent);
        let q = ObjectiveQuestion::new("t", "The telephone was invented by");
        let a = AnswerKey::new("Alexander Graham Bell");
        assert_eq!(
            e.transform(&q, &a, Some(&by)).unwrap().text,
            "Who was the telephone invented by?"
        );
        let q = ObjectiveQuestion::new("t", "The space agency of India is");
        let a = AnswerKey::new("ISRO");
        let is = cluster(ClusterKey::LastToken("is".into()));
        assert_eq!(is.template_id, TemplateId::Copula);
        assert_eq!(e.transform(&q, &a, Some(&is)).unwrap().text, "What is the space agency of India?");
        // copula template does not fit a passive stem; generic takes over
        let q = ObjectiveQuestion::new("t", "India became independent in");
        let a = AnswerKey::new("1947");
        assert_eq!(e.transform(&q, &a, Some(&is)).unwrap().text, "When did India become independent?");
    }

    #[test]
    fn quantity_questions_carry_the_noun() {
        assert_eq!(
            convert("The human body has", "206 bones").unwrap(),
            "How many bones does the human body have?"
        );
    }

    #[test]
    fn transform_failures() {
        assert_eq!(convert("Capital of France", "Paris"), Err(RuleError::NoFiniteVerb));
        assert_eq!(convert("X is", " "), Err(RuleError::EmptyAnswer));
    }

    #[test]
    fn annotation_errors_propagate() {
        struct Broken;
        impl Annotator for Broken {
            fn annotate(&self, _: &str) -> Result<Annotation, AnnotateError> {
                Err(AnnotateError::Unavailable("offline".into()))
            }
        }
        let e = RuleTransformer::new(Arc::new(Broken));
        let r = e.transform(
            &ObjectiveQuestion::new("t", "Polio is caused by"),
            &AnswerKey::new("a virus"),
            None,
        );
        assert!(matches!(r, Err(RuleError::Annotation(AnnotateError::Unavailable(_)))));
        assert_eq!(e.annotate(""), Err(RuleError::Annotation(AnnotateError::EmptyInput)));
    }

    #[test]
    fn key_bindings() {
        assert_eq!(
            template_for_key(&ClusterKey::LastBigram("caused".into(), "by".into())),
            TemplateId::PassiveAgent
        );
        assert_eq!(template_for_key(&ClusterKey::LastToken("were".into())), TemplateId::Copula);
        assert_eq!(template_for_key(&ClusterKey::FirstToken("by".into())), TemplateId::Generic);
        assert_eq!(template_for_key(&ClusterKey::LastToken("include".into())), TemplateId::Generic);
    }

    #[test]
    fn entity_keeps_capital_after_inversion() {
        let a = Annotation::new(
            vec!["Ganga".into(), "flows".into(), "into".into()],
            vec![Pos::NN, Pos::VBZ, Pos::IN],
            vec!["ganga".into(), "flow".into(), "into".into()],
            vec![EntitySpan { start: 0, end: 1, entity: EntityType::Location }],
        );
        assert_eq!(subject_aux_inversion("Ganga flows into", &a).unwrap(), "does Ganga flow into");
    }
}
