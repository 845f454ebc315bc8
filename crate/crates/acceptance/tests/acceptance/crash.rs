use std::collections::HashSet;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::time::Duration;

use talkwatch::store::replay_from_log;
use talkwatch::{Store, StoreState};
use talkwatch_acceptance::{final_ranking, run_worker};

use crate::Outcome;

const WORKER: &str = env!("CARGO_BIN_EXE_crash-worker");

enum Kill {
    /// After the worker reports this many ticks.
    AfterTick(usize),
    /// After a wall-clock delay, wherever the worker is.
    AfterMillis(u64),
    /// Let it finish, then tear the last record in half.
    TearTail(u64),
}

fn spawn(log: &Path, delay_ms: u64) -> Result<Child, String> {
    Command::new(WORKER)
        .arg(log)
        .arg(delay_ms.to_string())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())
}

fn alert_ids(state: &StoreState) -> Result<HashSet<String>, String> {
    let ids: HashSet<String> = state.alerts.iter().map(|a| a.alert_id.clone()).collect();
    if ids.len() != state.alerts.len() {
        return Err("duplicate alert ids in the log".into());
    }
    Ok(ids)
}

/// Run one crash scenario and return the state left by the crash and the
/// state after recovery.
fn scenario(dir: &Path, kill: &Kill) -> Result<(StoreState, StoreState), String> {
    let log = dir.join("events.log");
    match kill {
        Kill::AfterTick(n) => {
            let mut child = spawn(&log, 200)?;
            let stdout = child.stdout.take().ok_or("no stdout")?;
            for line in BufReader::new(stdout).lines() {
                if line.map_err(|e| e.to_string())? == format!("tick {n}") {
                    break;
                }
            }
            child.kill().map_err(|e| e.to_string())?;
            child.wait().map_err(|e| e.to_string())?;
        }
        Kill::AfterMillis(ms) => {
            let mut child = spawn(&log, 15)?;
            std::thread::sleep(Duration::from_millis(*ms));
            let _ = child.kill();
            child.wait().map_err(|e| e.to_string())?;
        }
        Kill::TearTail(cut) => {
            let status = spawn(&log, 0)?.wait().map_err(|e| e.to_string())?;
            if !status.success() {
                return Err(format!("worker failed: {status}"));
            }
            let len = std::fs::metadata(&log).map_err(|e| e.to_string())?.len();
            let file = OpenOptions::new().write(true).open(&log).map_err(|e| e.to_string())?;
            file.set_len(len - cut).map_err(|e| e.to_string())?;
            // and a half-written record header after it
            let mut file = OpenOptions::new().append(true).open(&log).map_err(|e| e.to_string())?;
            file.write_all(&[0x40, 0, 0]).map_err(|e| e.to_string())?;
        }
    }
    let crashed = match std::fs::metadata(&log) {
        Ok(_) => replay_from_log(&log).map_err(|e| e.to_string())?.0,
        Err(_) => StoreState::default(),
    };
    let status = spawn(&log, 0)?.wait().map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("restarted worker failed: {status}"));
    }
    let (replayed, problem) = replay_from_log(&log).map_err(|e| e.to_string())?;
    if let Some(p) = problem {
        return Err(format!("log still damaged after recovery: {p}"));
    }
    let (reopened, _) = Store::open(&log).map_err(|e| e.to_string())?;
    if *reopened.snapshot() != replayed {
        return Err("reopened store differs from a replay of its log".into());
    }
    Ok((crashed, replayed))
}

pub fn check() -> Outcome {
    let reference = Arc::new(Store::in_memory());
    run_worker(reference.clone(), Duration::ZERO, |_| {})?;
    let reference = reference.snapshot();
    let want_ranking = final_ranking(&reference);
    let want_alerts = alert_ids(&reference)?;
    if want_alerts.is_empty() || want_ranking.is_empty() {
        return Err("reference run produced no alerts or ranking".into());
    }

    let kills = [
        Kill::AfterTick(1),
        Kill::AfterTick(2),
        Kill::AfterTick(3),
        Kill::AfterMillis(5),
        Kill::AfterMillis(25),
        Kill::AfterMillis(40),
        Kill::AfterMillis(60),
        Kill::TearTail(3),
        Kill::TearTail(40),
    ];
    let mut interrupted = 0;
    for (i, kill) in kills.iter().enumerate() {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let (crashed, recovered) = scenario(dir.path(), kill).map_err(|e| format!("scenario {i}: {e}"))?;
        if final_ranking(&recovered) != want_ranking {
            return Err(format!("scenario {i}: ranking differs after recovery"));
        }
        if alert_ids(&recovered)? != want_alerts {
            return Err(format!("scenario {i}: alert ids differ after recovery"));
        }
        let (again, _) = replay_from_log(&dir.path().join("events.log")).map_err(|e| e.to_string())?;
        if alert_ids(&again)? != want_alerts {
            return Err(format!("scenario {i}: second replay changed the alerts"));
        }
        if crashed.last_sequence_no < recovered.last_sequence_no {
            interrupted += 1;
        }
    }
    if interrupted < kills.len() / 2 {
        return Err(format!("only {interrupted} of {} kills interrupted the worker", kills.len()));
    }
    Ok(format!(
        "{} kill/tear scenarios ({interrupted} cut work short) recover to the reference ranking and {} alert ids",
        kills.len(),
        want_alerts.len()
    ))
}
