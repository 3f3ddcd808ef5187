mod common;

use std::sync::Arc;

use common::{read_jsonl, GoldenTriple, LabeledQuestion};
use subjq::classifier::{category_histogram, classify, ClassifierConfig};
use subjq::text::{AnswerKey, ObjectiveQuestion};
use subjq::{LexiconAnnotator, RuleTransformer};

#[test]
fn classifier_fixture_agrees_with_labels() {
    let rows: Vec<LabeledQuestion> = read_jsonl("classifier.jsonl");
    assert_eq!(rows.len(), 30);
    let cfg = ClassifierConfig::default();
    let wrong: Vec<_> = rows
        .iter()
        .filter(|r| classify(&ObjectiveQuestion::new(&r.id, &r.question), &cfg).unwrap() != r.label)
        .map(|r| r.id.as_str())
        .collect();
    assert!(wrong.is_empty(), "misclassified: {wrong:?}");
    let qs: Vec<_> = rows.iter().map(|r| ObjectiveQuestion::new(&r.id, &r.question)).collect();
    let h = category_histogram(qs.iter(), &cfg).unwrap();
    assert_eq!(h.total(), 30);
}

#[test]
fn template_golden_triples() {
    let rows: Vec<GoldenTriple> = read_jsonl("templates.jsonl");
    assert_eq!(rows.len(), 20);
    let mut lexicon = LexiconAnnotator::english();
    lexicon.extend_from_file(&common::fixture("lexicon.json")).unwrap();
    let t = RuleTransformer::new(Arc::new(lexicon));
    let mut failures = Vec::new();
    for r in &rows {
        let cluster = r.cluster();
        let got = t.transform(&ObjectiveQuestion::new("g", &r.question), &AnswerKey::new(&r.answer), Some(&cluster));
        match got {
            Ok(c) if c.text == r.expected => {}
            Ok(c) => failures.push(format!("{:?}: got {:?}, want {:?}", r.question, c.text, r.expected)),
            Err(e) => failures.push(format!("{:?}: {e}", r.question)),
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
