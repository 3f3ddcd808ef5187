//! Replays recorded "People also ask" results and filters them for
//! relevance to the question/answer pair.

use std::path::Path;

use subjq::kb::{build_queries, filter_candidates, FilterConfig, KbClient, ReplayStore, DEFAULT_LIMIT};
use subjq::text::{AnswerKey, ObjectiveQuestion};
use subjq::HashingEmbedder;

fn main() {
    let mut store = ReplayStore::default();
    store
        .load_file(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/kb_replay.jsonl"))
        .unwrap();
    let client = KbClient::replay(store, DEFAULT_LIMIT);

    let question = ObjectiveQuestion::new("d01", "desert plants have scale/spine-like leaves to");
    let answer = AnswerKey::new("reduce the loss of water by transpiration");
    let embedder = HashingEmbedder::default();

    for query in build_queries(&question, &answer) {
        print!("{:?} {:?}: ", query.permutation, query.text);
        match client.fetch(&query) {
            Ok(result) => {
                let kept = filter_candidates(&result.questions, &question, &answer, &FilterConfig::default(), &embedder);
                println!("{} fetched, {} kept", result.questions.len(), kept.len());
                for q in kept {
                    println!("    {q}");
                }
            }
            Err(e) => println!("{e}"),
        }
    }
}
