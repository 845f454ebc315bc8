use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use talkwatch::store::snapshot_path;
use talkwatch::{Config, Store};
use talkwatch_replay::corpus::read_corpus;
use talkwatch_replay::eval::{scorer_from_name, sweep, EvalError, EvalReport};
use talkwatch_replay::session::{run_fixture_session, SessionError};

#[derive(Parser)]
#[command(name = "replay", version, about = "Replay recorded talk pages and evaluate forecasters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a labeled corpus and report precision, recall and F1.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        /// baseline, oracle, constant:<v> or external:<url>
        #[arg(long, default_value = "baseline")]
        scorer: String,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Report at n+1 evenly spaced thresholds from 0 to 1 instead.
        #[arg(long, value_name = "N")]
        sweep: Option<u32>,
        #[arg(long, conflicts_with = "tsv")]
        json: bool,
        #[arg(long)]
        tsv: bool,
        /// Score conversations on all cores.
        #[arg(long)]
        parallel: bool,
    },
    /// Run recorded revisions through the monitor and write the final ranking.
    Session {
        #[arg(long, required = true, num_args = 1..)]
        fixtures: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Ranking JSON output.
        #[arg(long)]
        out: PathBuf,
        /// Event log for the session; defaults to <out>.events and is replaced.
        #[arg(long)]
        store: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Usage(m) => Failure::Usage(m),
            e @ EvalError::Scoring { .. } => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Input(_) | SessionError::Fixture(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(io::stderr).with_env_filter(
        tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
    ).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Eval { corpus, scorer, threshold, sweep, json, tsv, parallel } => {
            eval(&corpus, &scorer, threshold, sweep, json, tsv, parallel)
        }
        Command::Session { fixtures, config, out, store } => session(&fixtures, config.as_deref(), &out, store),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn eval(
    path: &Path,
    scorer: &str,
    threshold: f64,
    steps: Option<u32>,
    json: bool,
    tsv: bool,
    parallel: bool,
) -> Result<(), Failure> {
    let file = File::open(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let corpus = read_corpus(BufReader::new(file)).map_err(|e| Failure::Usage(e.to_string()))?;
    let scorer = scorer_from_name(scorer, &corpus)?;
    let thresholds: Vec<f64> = match steps {
        Some(0) => return Err(Failure::Usage("--sweep needs at least 1 step".into())),
        Some(n) => (0..=n).map(|i| f64::from(i) / f64::from(n)).collect(),
        None => vec![threshold],
    };
    let reports = sweep(&corpus, scorer.as_ref(), &thresholds, parallel)?;
    print_reports(&reports, json, tsv).map_err(|e| Failure::Runtime(e.to_string()))
}

fn print_reports(reports: &[EvalReport], json: bool, tsv: bool) -> io::Result<()> {
    let mut out = io::stdout().lock();
    if json {
        if let [one] = reports {
            serde_json::to_writer_pretty(&mut out, one)?;
        } else {
            serde_json::to_writer_pretty(&mut out, reports)?;
        }
        writeln!(out)?;
    } else if tsv {
        writeln!(out, "{}", EvalReport::TSV_HEADER)?;
        for r in reports {
            writeln!(out, "{}", r.tsv_row())?;
        }
    } else {
        for r in reports {
            let lead = r.mean_lead_time.map_or("n/a".to_string(), |l| format!("{l:.2}"));
            writeln!(
                out,
                "{} @ {:.3}: precision {:.3} recall {:.3} f1 {:.3} (tp {} fp {} tn {} fn {}) lead {}",
                r.scorer_id, r.threshold, r.precision, r.recall, r.f1,
                r.true_positives, r.false_positives, r.true_negatives, r.false_negatives, lead,
            )?;
        }
    }
    Ok(())
}

fn session(fixtures: &[PathBuf], config: Option<&Path>, out: &Path, store: Option<PathBuf>) -> Result<(), Failure> {
    let config = match config {
        Some(p) => Config::load(p).map_err(|e| Failure::Usage(e.to_string()))?,
        None => Config::default(),
    };
    let log = store.unwrap_or_else(|| PathBuf::from(format!("{}.events", out.display())));
    for stale in [log.clone(), snapshot_path(&log)] {
        match std::fs::remove_file(&stale) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(Failure::Runtime(format!("{}: {e}", stale.display()))),
        }
    }
    let (store, _) = Store::open(&log).map_err(|e| Failure::Runtime(e.to_string()))?;
    let outcome = run_fixture_session(fixtures, &config, Arc::new(store))?;
    for e in &outcome.errors {
        eprintln!("warning: {e}");
    }
    let json = serde_json::to_string_pretty(&outcome.ranking).map_err(|e| Failure::Runtime(e.to_string()))?;
    std::fs::write(out, json + "\n").map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
    Ok(())
}
