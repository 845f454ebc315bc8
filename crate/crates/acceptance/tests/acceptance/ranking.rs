use std::time::Duration as StdDuration;

use chrono::{DateTime, Duration, TimeZone, Utc};
use proptest::prelude::*;
use talkwatch::forecast::round_score;
use talkwatch::ranking::{build_ranking, compute_trend, RankingConfig, RankingEntry};
use talkwatch::{CommentRecord, ConversationRecord, ForecastHistory, ForecastPoint, TrendBucket};

use crate::{run_cases, Outcome};

const CASES: u32 = 1000;

#[derive(Debug, Clone)]
struct Item {
    grid: u32,
    idle_hours: i64,
    live: bool,
    scored: bool,
}

fn now() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 6, 1, 12, 0, 0).unwrap()
}

fn items() -> impl Strategy<Value = Vec<Item>> {
    proptest::collection::vec(
        (0u32..=1000, 0i64..200, prop::bool::weighted(0.85), prop::bool::weighted(0.9))
            .prop_map(|(grid, idle_hours, live, scored)| Item { grid, idle_hours, live, scored }),
        0..25,
    )
}

fn build(items: &[Item], f: &dyn Fn(f64) -> f64) -> Vec<(ConversationRecord, ForecastHistory)> {
    items
        .iter()
        .enumerate()
        .map(|(i, it)| {
            let id = format!("conv-{i:02}");
            let at = now() - Duration::hours(it.idle_hours);
            let conv = ConversationRecord {
                conversation_id: id.clone(),
                page_title: "Talk:P".into(),
                heading: format!("H{i}"),
                comments: vec![CommentRecord {
                    comment_id: format!("{id}-1"),
                    author: "A".into(),
                    posted_at: Some(at),
                    text: "t".into(),
                    indent_depth: 0,
                    parent_comment_id: None,
                    ordinal: 1,
                }],
                last_activity: Some(at),
                is_live: it.live,
            };
            let mut h = ForecastHistory::new(&id);
            if it.scored {
                h.append(ForecastPoint::new(&id, 1, f(f64::from(it.grid) / 1000.0), "s", at).unwrap()).unwrap();
            }
            (conv, h)
        })
        .collect()
}

fn rank(pairs: &[(ConversationRecord, ForecastHistory)], config: &RankingConfig) -> Vec<String> {
    ids(&build_ranking(pairs.iter().map(|(c, h)| (c, h)), now(), config))
}

fn ids(entries: &[RankingEntry]) -> Vec<String> {
    entries.iter().map(|e| e.conversation_id.clone()).collect()
}

fn trend_table() -> Result<usize, String> {
    let mut rows = 0;
    for (magnitude, small, large) in [(0.049, false, false), (0.05, true, false), (0.149, true, false), (0.15, false, true)] {
        for sign in [1.0, -1.0] {
            let delta: f64 = sign * magnitude;
            let expected = match (small, large, sign > 0.0) {
                (false, false, _) => TrendBucket::Flat,
                (true, _, true) => TrendBucket::RisingSmall,
                (true, _, false) => TrendBucket::FallingSmall,
                (_, true, true) => TrendBucket::RisingLarge,
                (_, true, false) => TrendBucket::FallingLarge,
            };
            for base in [0.3, 0.5, 0.55] {
                let mut h = ForecastHistory::new("c");
                h.append(ForecastPoint::new("c", 1, base, "s", now()).unwrap()).unwrap();
                h.append(ForecastPoint::new("c", 2, base + delta, "s", now()).unwrap()).unwrap();
                let (d, bucket) = compute_trend(&h, &RankingConfig::default().trend);
                if bucket != expected || d != round_score(delta) {
                    return Err(format!("{base} -> {}: got ({d}, {bucket:?}), want {expected:?}", base + delta));
                }
                rows += 1;
            }
        }
    }
    Ok(rows)
}

pub fn check() -> Outcome {
    let config = RankingConfig::default();
    let transforms: [(&str, fn(f64) -> f64); 4] = [
        ("square", |x| x * x),
        ("sqrt", f64::sqrt),
        ("affine", |x| 0.25 + 0.5 * x),
        ("mixed", |x| (x + x * x) / 2.0),
    ];
    run_cases(CASES, items(), |items| {
        let base = rank(&build(&items, &|x| x), &config);
        for (name, f) in &transforms {
            prop_assert_eq!(&rank(&build(&items, f), &config), &base, "{}", name);
        }
        Ok(())
    })
    .map_err(|e| format!("monotone transforms: {e}"))?;

    run_cases(CASES, (items(), any::<u64>()), |(items, seed)| {
        let pairs = build(&items, &|x| x);
        let entries = build_ranking(pairs.iter().map(|(c, h)| (c, h)), now(), &config);
        for w in entries.windows(2) {
            let key = |e: &RankingEntry| (e.latest_score, -e.age, e.conversation_id.clone());
            let (a, b) = (key(&w[0]), key(&w[1]));
            let ordered = a.0 > b.0 || (a.0 == b.0 && (a.1 > b.1 || (a.1 == b.1 && a.2 < b.2)));
            prop_assert!(ordered, "{:?} before {:?}", a, b);
        }
        let mut shuffled = pairs.clone();
        let len = shuffled.len();
        if len > 1 {
            let mut s = seed;
            for i in (1..len).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
        }
        prop_assert_eq!(rank(&shuffled, &config), ids(&entries));
        Ok(())
    })
    .map_err(|e| format!("total order: {e}"))?;

    run_cases(CASES, (items(), 1u64..=96), |(items, hours)| {
        let narrow = RankingConfig { staleness: StdDuration::from_secs(hours * 3600), ..config };
        let pairs = build(&items, &|x| x);
        let got = rank(&pairs, &narrow);
        let mut want: Vec<String> = items
            .iter()
            .enumerate()
            .filter(|(_, it)| it.live && it.scored && it.idle_hours as u64 <= hours)
            .map(|(i, _)| format!("conv-{i:02}"))
            .collect();
        let mut sorted = got.clone();
        sorted.sort();
        want.sort();
        prop_assert_eq!(sorted, want);
        Ok(())
    })
    .map_err(|e| format!("staleness exclusion: {e}"))?;

    let rows = trend_table()?;
    Ok(format!(
        "{CASES} cases each: monotone-transform invariance, total order, staleness exclusion; {rows} trend boundary rows"
    ))
}
