//! `crash-worker <log> [delay-ms]`: run the fixture session against an event
//! log, printing `tick <n>` after each tick and `done` at the end.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use talkwatch::Store;
use talkwatch_acceptance::run_worker;

fn main() -> ExitCode {
    let mut args = std::env::args().skip(1);
    let Some(log) = args.next().map(PathBuf::from) else {
        eprintln!("usage: crash-worker <log> [delay-ms]");
        return ExitCode::from(1);
    };
    let delay = args.next().and_then(|d| d.parse().ok()).map_or(Duration::ZERO, Duration::from_millis);
    let store = match Store::open(&log) {
        Ok((store, _)) => Arc::new(store),
        Err(e) => {
            eprintln!("cannot open {}: {e}", log.display());
            return ExitCode::from(2);
        }
    };
    let mut out = std::io::stdout();
    let result = run_worker(store, delay, |n| {
        let _ = writeln!(out, "tick {n}");
        let _ = out.flush();
    });
    match result {
        Ok(()) => {
            println!("done");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}
