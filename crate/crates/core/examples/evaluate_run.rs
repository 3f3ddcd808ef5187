//! Scores a small run against gold questions and compares it with a
//! baseline row.

use subjq::evaluation::{evaluate_corpus, read_baseline_csv, GoldSet, Matcher, Report, RunRecord, DEFAULT_KS};
use subjq::HashingEmbedder;

fn main() {
    let gold = vec![
        GoldSet {
            id: "1".into(),
            gold: vec![
                "What kind of wastes can choke the drains?".into(),
                "Which wastes can block the drains?".into(),
                "What should not be thrown into drains?".into(),
            ],
        },
        GoldSet {
            id: "2".into(),
            gold: vec![
                "What causes polio?".into(),
                "How is polio spread?".into(),
                "Which vaccine prevents polio?".into(),
            ],
        },
    ];
    let run = vec![
        RunRecord {
            id: "1".into(),
            ranked: vec![
                "What do the wastes that can choke the drains include?".into(),
                "Which wastes block the drains?".into(),
                "Why do drains overflow?".into(),
            ],
        },
        RunRecord {
            id: "2".into(),
            ranked: vec!["What is polio caused by?".into(), "What causes polio?".into()],
        },
    ];

    let embedder = HashingEmbedder::default();
    let ours = evaluate_corpus(&run, &gold, &DEFAULT_KS, Matcher::default(), &embedder).unwrap();
    let baseline = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/baseline_t5.csv");
    let (name, base) = read_baseline_csv(&baseline).unwrap();

    let mut report = Report::new(&DEFAULT_KS);
    report.push("example run", &ours);
    report.push(&name, &base);
    report.push_improvement(0, 1);
    print!("{}", report.render());
}
