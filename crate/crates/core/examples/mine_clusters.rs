//! Mines token-pattern clusters from the fixture corpus and shows which
//! cluster each declarative stem falls into.

use std::path::Path;

use subjq::clusters::{assign_cluster, mine_clusters};
use subjq::pipeline::read_corpus;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus.jsonl");
    let file = std::fs::File::open(path).unwrap();
    let (records, _) = read_corpus(std::io::BufReader::new(file)).unwrap();
    let questions: Vec<_> = records.iter().map(|r| r.question()).collect();

    let clusters = mine_clusters(&questions, 3).unwrap();
    for c in clusters.iter() {
        println!("{:?} x{} -> {:?}", c.key, c.frequency, c.template_id);
    }

    for q in questions.iter().take(5) {
        match assign_cluster(q, &clusters) {
            Some(c) => println!("{:?} in {:?}", q.text(), c.key),
            None => println!("{:?} unclustered", q.text()),
        }
    }
    println!("{}", clusters.to_json());
}
