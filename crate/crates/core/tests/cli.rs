mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::fixture;
use subjq::clusters::ClusterSet;

fn subjq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subjq"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn convert_fixture_corpus(out: &Path) {
    let o = subjq(&[
        "convert",
        "--in",
        path(&fixture("corpus.jsonl")),
        "--out",
        path(out),
        "--config",
        path(&fixture("pipeline.toml")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn convert_writes_one_line_per_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.jsonl");
    convert_fixture_corpus(&out);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 50);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["id"], "d01");
    assert_eq!(first["candidates"].as_array().unwrap().len(), 3);
}

#[test]
fn startup_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.jsonl");
    let missing = dir.path().join("nope.toml");
    let o = subjq(&["convert", "--in", path(&fixture("corpus.jsonl")), "--out", path(&out), "--config", path(&missing)]);
    assert_eq!(o.status.code(), Some(1));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "k = 3\nunknown_key = true\n").unwrap();
    let o = subjq(&["convert", "--in", path(&fixture("corpus.jsonl")), "--out", path(&out), "--config", path(&bad)]);
    assert_eq!(o.status.code(), Some(1));

    let o = subjq(&["convert", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(subjq(&["--help"]).status.code(), Some(0));
}

#[test]
fn live_kb_is_rejected_in_deterministic_mode() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.jsonl");
    let o = subjq(&[
        "convert",
        "--in",
        path(&fixture("corpus.jsonl")),
        "--out",
        path(&out),
        "--config",
        path(&fixture("pipeline.toml")),
        "--kb-mode",
        "live",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn mine_clusters_reproduces_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("clusters.json");
    let o = subjq(&["mine-clusters", "--in", path(&fixture("corpus.jsonl")), "--min-frequency", "2", "--out", path(&out)]);
    assert!(o.status.success());
    let mined = ClusterSet::load(&out).unwrap();
    let stored = ClusterSet::load(&fixture("clusters.json")).unwrap();
    assert_eq!(mined, stored);
}

#[test]
fn mine_clusters_on_empty_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.jsonl");
    fs::write(&input, "").unwrap();
    let out = dir.path().join("clusters.json");
    let o = subjq(&["mine-clusters", "--in", path(&input), "--out", path(&out)]);
    assert!(o.status.success());
    assert!(ClusterSet::load(&out).unwrap().is_empty());
}

#[test]
fn evaluate_convert_output_against_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.jsonl");
    convert_fixture_corpus(&run);
    let csv = dir.path().join("report.csv");
    let o = subjq(&[
        "evaluate",
        "--run",
        path(&run),
        "--gold",
        path(&fixture("gold.jsonl")),
        "--baseline",
        path(&fixture("baseline_t5.csv")),
        "--csv",
        path(&csv),
        "--name",
        "hybrid",
    ]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout.contains("T5-Transformer"), "{stdout}");
    assert!(stdout.contains("improvement %"), "{stdout}");
    assert!(stdout.contains("questions: 44"), "{stdout}");
    let report = fs::read_to_string(&csv).unwrap();
    assert_eq!(report.lines().count(), 4);
    assert!(report.starts_with("system,R@1,R@2,R@3,P@1,P@2,P@3"));
}

#[test]
fn evaluate_perfect_run_with_exact_matcher() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.jsonl");
    let gold = fs::read_to_string(fixture("gold.jsonl")).unwrap();
    fs::write(&run, gold.replace("\"gold\"", "\"ranked\"")).unwrap();
    let csv = dir.path().join("report.csv");
    let o = subjq(&[
        "evaluate",
        "--run",
        path(&run),
        "--gold",
        path(&fixture("gold.jsonl")),
        "--matcher",
        "exact",
        "--csv",
        path(&csv),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(&csv).unwrap();
    let row = report.lines().nth(1).unwrap();
    assert_eq!(row, "run,0.333333,0.666667,1.000000,1.000000,1.000000,1.000000");
}

#[test]
fn evaluate_id_mismatch_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.jsonl");
    fs::write(&run, "{\"id\": \"zz\", \"ranked\": [\"What?\"]}\n").unwrap();
    let o = subjq(&["evaluate", "--run", path(&run), "--gold", path(&fixture("gold.jsonl"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_bad_matcher_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.jsonl");
    fs::write(&run, "").unwrap();
    let o = subjq(&["evaluate", "--run", path(&run), "--gold", path(&fixture("gold.jsonl")), "--matcher", "fuzzy"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn evaluate_matches_hand_computed_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.jsonl");
    let gold = dir.path().join("gold.jsonl");
    fs::write(
        &run,
        "{\"id\":\"a\",\"ranked\":[\"Why g1?\",\"Why x?\",\"Why g2?\"]}\n{\"id\":\"b\",\"ranked\":[\"Why x?\",\"Why y?\",\"Why z?\"]}\n",
    )
    .unwrap();
    fs::write(
        &gold,
        "{\"id\":\"a\",\"gold\":[\"Why g1?\",\"Why g2?\",\"Why g3?\"]}\n{\"id\":\"b\",\"gold\":[\"Why g1?\",\"Why g2?\",\"Why g3?\"]}\n",
    )
    .unwrap();
    let csv = dir.path().join("report.csv");
    let o = subjq(&["evaluate", "--run", path(&run), "--gold", path(&gold), "--matcher", "exact", "--csv", path(&csv)]);
    assert!(o.status.success());
    // a hits at ranks 1 and 3, b never: R@k = (hits_a / 3) / 2, P@k = (hits_a / k) / 2
    let report = fs::read_to_string(&csv).unwrap();
    assert_eq!(
        report.lines().nth(1).unwrap(),
        "run,0.166667,0.166667,0.333333,0.500000,0.250000,0.333333"
    );
}

#[test]
fn evaluate_reports_headline_improvement_over_t5_row() {
    // 51 of 125 records find all three gold questions: R@3 = 153 / 375 = 0.408
    let dir = tempfile::tempdir().unwrap();
    let (mut run, mut gold) = (String::new(), String::new());
    for i in 0..125 {
        let g = [format!("Why g{i}a?"), format!("Why g{i}b?"), format!("Why g{i}c?")];
        let ranked = if i < 51 { g.to_vec() } else { vec!["Why not?".to_string()] };
        run.push_str(&serde_json::json!({"id": i.to_string(), "ranked": ranked}).to_string());
        run.push('\n');
        gold.push_str(&serde_json::json!({"id": i.to_string(), "gold": g}).to_string());
        gold.push('\n');
    }
    let (run_path, gold_path) = (dir.path().join("run.jsonl"), dir.path().join("gold.jsonl"));
    fs::write(&run_path, run).unwrap();
    fs::write(&gold_path, gold).unwrap();
    let o = subjq(&[
        "evaluate",
        "--run",
        path(&run_path),
        "--gold",
        path(&gold_path),
        "--matcher",
        "exact",
        "--baseline",
        path(&fixture("baseline_t5.csv")),
    ]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success());
    let improvement = stdout.lines().find(|l| l.starts_with("improvement %")).unwrap();
    let cells: Vec<&str> = improvement.split_whitespace().skip(2).collect();
    assert_eq!(cells[2], "36.45", "{stdout}");
}

#[test]
fn mine_clusters_prunes_the_600_400_split() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("corpus.jsonl");
    let mut text = String::new();
    for i in 0..1000 {
        let q = if i < 600 { "The process is called" } else { "The capital is" };
        text.push_str(&serde_json::json!({"id": i.to_string(), "question": q, "answer": "x"}).to_string());
        text.push('\n');
    }
    fs::write(&input, text).unwrap();
    let out = dir.path().join("clusters.json");
    let o = subjq(&["mine-clusters", "--in", path(&input), "--min-frequency", "500", "--out", path(&out)]);
    assert!(o.status.success());
    let set = ClusterSet::load(&out).unwrap();
    let keys: Vec<String> = set.iter().map(|c| format!("{:?}={}", c.key, c.frequency)).collect();
    assert_eq!(
        keys,
        [
            "LastToken(\"called\")=600",
            "LastBigram(\"is\", \"called\")=600",
            "FirstToken(\"the\")=1000"
        ]
    );
}
