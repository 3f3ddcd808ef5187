//! Deduplicates and ranks a mixed candidate pool against the source pair.

use subjq::ranker::{dedupe, query_text, rank, QueryMode, Ranking};
use subjq::text::{CandidateSubjectiveQuestion, Provenance};
use subjq::HashingEmbedder;

fn main() {
    let embedder = HashingEmbedder::default();
    let pool = vec![
        CandidateSubjectiveQuestion::new("What is polio caused by?", Provenance::Template),
        CandidateSubjectiveQuestion::new("What causes polio?", Provenance::Neural),
        CandidateSubjectiveQuestion::new("what causes polio?", Provenance::KnowledgeBase),
        CandidateSubjectiveQuestion::new("Is polio still around?", Provenance::KnowledgeBase),
        CandidateSubjectiveQuestion::new("How does the polio virus spread?", Provenance::KnowledgeBase),
    ];
    let pool = dedupe(pool, 0.95, &embedder);
    let query = query_text("Polio is caused by", "a virus", QueryMode::QuestionAnswer);

    match rank(&query, &pool, 3, &embedder) {
        Ranking::Scored(ranked) => {
            for s in ranked {
                println!("{:.3} {:?} {}", s.score, s.candidate.provenance, s.candidate.text);
            }
        }
        Ranking::Degraded(list) => println!("degraded: {list:?}"),
    }
}
