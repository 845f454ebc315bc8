#[path = "../../../core/tests/support/golden.rs"]
mod golden;

use crate::Outcome;

pub fn check() -> Outcome {
    let names = golden::fixture_names();
    for topic in ["unsigned", "nested", "rename", "multi_append"] {
        if !names.iter().any(|n| n.contains(topic)) {
            return Err(format!("no fixture covering {topic}"));
        }
    }
    let (count, elapsed) = golden::check_fixtures()?;
    if count < 10 {
        return Err(format!("only {count} fixtures"));
    }
    if elapsed.as_secs_f64() >= 1.0 {
        return Err(format!("parsing took {elapsed:?}"));
    }
    Ok(format!("{count} fixtures match their goldens, parsed in {:.1} ms", elapsed.as_secs_f64() * 1e3))
}
