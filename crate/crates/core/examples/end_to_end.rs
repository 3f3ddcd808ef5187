//! Converts the fixture corpus with the offline replay configuration and
//! prints the first few output records.

use std::io::BufReader;
use std::path::Path;

use subjq::Pipeline;

fn main() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let pipeline = Pipeline::load(&fixtures.join("pipeline.toml")).unwrap();
    let input = BufReader::new(std::fs::File::open(fixtures.join("corpus.jsonl")).unwrap());

    let mut out = Vec::new();
    let summary = pipeline.convert_stream(input, &mut out).unwrap();
    for line in String::from_utf8(out).unwrap().lines().take(6) {
        println!("{line}");
    }
    println!(
        "{} records, {} skipped, {} degraded",
        summary.records, summary.skipped, summary.degraded
    );
}
