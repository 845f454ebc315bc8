//! Acceptance harness: runs every primary criterion and prints one
//! `PASS`/`FAIL` line for each. Exits non-zero if any criterion fails.

mod api;
mod crash;
mod history;
mod metrics;
mod parser;
mod ranking;
mod session;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

pub type Outcome = Result<String, String>;

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Outcome); 7] = [
        ("parser fixture suite", parser::check),
        ("end-to-end fixture session", session::check),
        ("history properties", history::check),
        ("ranking properties", ranking::check),
        ("metrics harness", metrics::check),
        ("crash safety", crash::check),
        ("api contract", api::check),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        let ms = started.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} ({ms} ms)"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} ({ms} ms)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

/// Run a proptest strategy outside the test harness.
pub fn run_cases<S: proptest::strategy::Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), proptest::test_runner::TestCaseError>,
) -> Result<(), String> {
    let config = proptest::test_runner::Config { cases, failure_persistence: None, ..Default::default() };
    proptest::test_runner::TestRunner::new(config).run(&strategy, test).map_err(|e| e.to_string())
}
