use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use subjq::clusters::{default_min_frequency, mine_clusters};
use subjq::config::PipelineConfig;
use subjq::evaluation::{
    evaluate_corpus, parse_ks, read_baseline_csv, read_gold, read_run, EvalError, Matcher, Report,
};
use subjq::kb::KbMode;
use subjq::pipeline::{read_corpus, Pipeline};
use subjq::HashingEmbedder;

#[derive(Parser)]
#[command(name = "subjq", version, about = "Turn objective questions into ranked subjective questions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KbModeArg {
    Live,
    Replay,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a JSON Lines corpus into ranked candidates.
    Convert {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum)]
        kb_mode: Option<KbModeArg>,
        #[arg(long)]
        clusters: Option<PathBuf>,
    },
    /// Mine token-pattern clusters from a corpus.
    MineClusters {
        #[arg(long = "in")]
        input: PathBuf,
        /// Defaults to a threshold scaled to the corpus size.
        #[arg(long)]
        min_frequency: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a run file against gold questions.
    Evaluate {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value = "1,2,3")]
        k: String,
        #[arg(long, default_value = "similarity:0.75")]
        matcher: String,
        /// Report CSV of a baseline system to compare against.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Write the report as CSV here as well.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value = "run")]
        name: String,
    },
}

enum Failure {
    Startup(String),
    Mismatch(String),
}

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure::Startup(s)
    }
}

fn convert(
    input: &Path,
    out: &Path,
    config: &Path,
    k: Option<usize>,
    kb_mode: Option<KbModeArg>,
    clusters: Option<PathBuf>,
) -> Result<(), Failure> {
    let mut cfg = PipelineConfig::load(config).map_err(|e| e.to_string())?;
    if let Some(k) = k {
        cfg.k = k;
    }
    if let Some(mode) = kb_mode {
        cfg.kb.mode = match mode {
            KbModeArg::Live => KbMode::Live,
            KbModeArg::Replay => KbMode::Replay,
            KbModeArg::Off => KbMode::Off,
        };
    }
    if let Some(path) = clusters {
        cfg.clusters.path = Some(path);
    }
    let pipeline = Pipeline::from_config(cfg).map_err(|e| e.to_string())?;
    let reader = File::open(input).map_err(|e| format!("{}: {e}", input.display()))?;
    let writer = File::create(out).map_err(|e| format!("{}: {e}", out.display()))?;
    let summary = pipeline
        .convert_stream(BufReader::new(reader), BufWriter::new(writer))
        .map_err(|e| e.to_string())?;
    log::info!(
        "{} records written ({} skipped, {} degraded, {} malformed lines)",
        summary.records,
        summary.skipped,
        summary.degraded,
        summary.malformed.len()
    );
    Ok(())
}

fn mine(input: &Path, min_frequency: Option<usize>, out: &Path) -> Result<(), Failure> {
    let file = File::open(input).map_err(|e| format!("{}: {e}", input.display()))?;
    let (records, errors) = read_corpus(BufReader::new(file)).map_err(|e| e.to_string())?;
    for e in &errors {
        log::error!("input line {}: {}", e.line, e.message);
    }
    if records.is_empty() {
        log::warn!("empty corpus; writing an empty cluster file");
    }
    let questions: Vec<_> = records.iter().map(|r| r.question()).collect();
    let threshold = min_frequency.unwrap_or_else(|| default_min_frequency(questions.len()));
    let set = mine_clusters(&questions, threshold).map_err(|e| e.to_string())?;
    set.save(out).map_err(|e| e.to_string())?;
    log::info!("{} clusters at min frequency {threshold}", set.len());
    Ok(())
}

fn evaluate(
    run: &Path,
    gold: &Path,
    k: &str,
    matcher: &str,
    baseline: Option<&Path>,
    csv_out: Option<&Path>,
    name: &str,
) -> Result<(), Failure> {
    let ks = parse_ks(k).map_err(|e| e.to_string())?;
    let matcher: Matcher = matcher.parse().map_err(|e: EvalError| e.to_string())?;
    let run = read_run(run).map_err(|e| e.to_string())?;
    let gold = read_gold(gold).map_err(|e| e.to_string())?;
    let result = match evaluate_corpus(&run, &gold, &ks, matcher, &HashingEmbedder::default()) {
        Ok(r) => r,
        Err(e @ EvalError::IdMismatch { .. }) => return Err(Failure::Mismatch(e.to_string())),
        Err(e) => return Err(Failure::Startup(e.to_string())),
    };
    let mut report = Report::new(&ks);
    report.push(name, &result);
    if let Some(path) = baseline {
        let (system, base) = read_baseline_csv(path).map_err(|e| e.to_string())?;
        report.push(&system, &base);
        report.push_improvement(0, 1);
    }
    print!("{}", report.render());
    println!("questions: {}", result.n_questions);
    if let Some(path) = csv_out {
        fs::write(path, report.to_csv()).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Convert {
            input,
            out,
            config,
            k,
            kb_mode,
            clusters,
        } => convert(&input, &out, &config, k, kb_mode, clusters),
        Command::MineClusters {
            input,
            min_frequency,
            out,
        } => mine(&input, min_frequency, &out),
        Command::Evaluate {
            run,
            gold,
            k,
            matcher,
            baseline,
            csv,
            name,
        } => evaluate(&run, &gold, &k, &matcher, baseline.as_deref(), csv.as_deref(), &name),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Startup(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Mismatch(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
