//! Sorts a few objective questions into the three routing categories.

use subjq::classifier::{category_histogram, classify, ClassifierConfig};
use subjq::text::ObjectiveQuestion;
use subjq::CategoryLabel;

fn main() {
    let cfg = ClassifierConfig::default();
    let questions = [
        "Which of the following is a metal",
        "What kind of wastes can choke the drains?",
        "The chemical symbol for silver is",
        "Choose the statement that is true about magnets",
        "Polio is caused by",
    ]
    .iter()
    .enumerate()
    .map(|(i, q)| ObjectiveQuestion::new(i.to_string(), *q))
    .collect::<Vec<_>>();

    for q in &questions {
        println!("{:<22} {}", classify(q, &cfg).unwrap().to_string(), q.text());
    }

    let h = category_histogram(questions.iter(), &cfg).unwrap();
    for label in CategoryLabel::ALL {
        println!("{label}: {} ({:.0}%)", h.count(label), 100.0 * h.fraction(label));
    }
}
