//! Turns declarative stems into wh-questions with the rule templates.

use std::sync::Arc;

use subjq::clusters::{Cluster, ClusterKey};
use subjq::rules::{template_for_key, to_declarative};
use subjq::text::{AnswerKey, ObjectiveQuestion};
use subjq::{LexiconAnnotator, RuleTransformer};

fn main() {
    let transformer = RuleTransformer::new(Arc::new(LexiconAnnotator::english()));
    let pairs = [
        ("The chemical symbol for silver is", "Ag"),
        ("Polio is caused by", "a virus"),
        ("The wastes that can choke the drains include", "used tea leaves, cotton"),
        ("The telephone was invented by", "Graham Bell"),
        ("The Sahara desert is in", "Africa"),
    ];
    for (q, a) in pairs {
        let question = ObjectiveQuestion::new("x", q);
        let answer = AnswerKey::new(a);
        let last = question.tokens().last().unwrap().to_lowercase();
        let key = ClusterKey::LastToken(last);
        let cluster = Cluster { template_id: template_for_key(&key), key, frequency: 1 };
        println!("{}", to_declarative(&question, &answer).unwrap());
        match transformer.transform(&question, &answer, Some(&cluster)) {
            Ok(c) => println!("  -> {}", c.text),
            Err(e) => println!("  !! {e}"),
        }
    }
}
