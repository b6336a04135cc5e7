//! Straightforward per-feature recompute over the flat event tables, written
//! without the library's feature helpers.

use std::collections::{BTreeMap, BTreeSet};

use stopout_core::model::{
    CollabKind, EventStore, LearnerId, ProblemKind, ResourceKind, SubmissionKind,
};

/// Rows keyed by (learner, week); values are x1 followed by the 27 covariates
/// in the order x2..x18, x201..x210.
pub type OracleRows = BTreeMap<(String, u32), Vec<f64>>;

fn week_of(store: &EventStore, secs: i64) -> Option<u32> {
    let cal = store.calendar();
    (1..=cal.num_weeks())
        .find(|&w| cal.week_start(w).secs() <= secs && secs < cal.week_end(w).secs())
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

pub fn naive_features(store: &EventStore, include_replies: bool) -> OracleRows {
    let cal = store.calendar();
    let weeks = cal.num_weeks();
    let learners: Vec<LearnerId> = store.learners().cloned().collect();
    let mut rows = OracleRows::new();

    for learner in &learners {
        let obs: Vec<_> = store
            .observed()
            .iter()
            .filter(|e| &e.learner == learner)
            .collect();
        let mut durations = Vec::new();
        for i in 0..obs.len() {
            let d = if i + 1 < obs.len() {
                (obs[i + 1].timestamp.secs() - obs[i].timestamp.secs()).min(3600)
            } else {
                3600
            };
            durations.push(d);
        }
        let checks: Vec<_> = store
            .submissions()
            .iter()
            .filter(|s| &s.learner == learner && s.kind == SubmissionKind::Check)
            .collect();
        let collabs: Vec<_> = store
            .collaborations()
            .iter()
            .filter(|c| &c.learner == learner)
            .collect();

        let last_week = checks
            .iter()
            .filter_map(|s| week_of(store, s.timestamp.secs()))
            .max()
            .unwrap_or(0);
        let solved: BTreeSet<&str> = checks
            .iter()
            .filter(|s| s.is_correct && week_of(store, s.timestamp.secs()).is_some())
            .map(|s| s.problem_id.as_str())
            .collect();
        let grade = |w: u32, kind: ProblemKind| {
            let assigned: Vec<_> = cal
                .problems()
                .filter(|p| p.assigned_week == w && p.kind == kind)
                .collect();
            if assigned.is_empty() {
                0.0
            } else {
                assigned
                    .iter()
                    .filter(|p| solved.contains(p.problem_id.as_str()))
                    .count() as f64
                    / assigned.len() as f64
            }
        };
        let over_time = |w: u32, kind: ProblemKind| {
            if w == 1 {
                return 0.0;
            }
            let past: Vec<f64> = (1..w).map(|v| grade(v, kind)).collect();
            grade(w, kind) - mean(&past)
        };

        for w in 1..=weeks {
            let in_week = |secs: i64| week_of(store, secs) == Some(w);
            let mut x2 = 0i64;
            let mut x15 = 0i64;
            let mut by_kind = [0i64; 3];
            let mut tods = Vec::new();
            for (e, &d) in obs.iter().zip(&durations) {
                if !in_week(e.timestamp.secs()) {
                    continue;
                }
                x2 += d;
                x15 = x15.max(d);
                match e.kind {
                    ResourceKind::Lecture => by_kind[0] += d,
                    ResourceKind::Book => by_kind[1] += d,
                    ResourceKind::Wiki => by_kind[2] += d,
                    _ => {}
                }
                tods.push(e.timestamp.secs().rem_euclid(86_400) as f64);
            }
            let x13 = if tods.len() < 2 {
                0.0
            } else {
                let m = mean(&tods);
                tods.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / tods.len() as f64
            };

            let week_collabs: Vec<_> = collabs
                .iter()
                .filter(|c| in_week(c.timestamp.secs()))
                .collect();
            let count = |k: CollabKind| week_collabs.iter().filter(|c| c.kind == k).count() as f64;
            let (x3, x201, x4) = (
                count(CollabKind::ForumPost),
                count(CollabKind::ForumReply),
                count(CollabKind::WikiEdit),
            );
            let lengths: Vec<f64> = week_collabs
                .iter()
                .filter(|c| {
                    c.kind == CollabKind::ForumPost
                        || (include_replies && c.kind == CollabKind::ForumReply)
                })
                .map(|c| c.content_chars as f64)
                .collect();
            let x5 = mean(&lengths);

            let week_checks: Vec<_> = checks
                .iter()
                .filter(|s| in_week(s.timestamp.secs()))
                .collect();
            let x7 = week_checks.len() as f64;
            let attempted: BTreeSet<&str> =
                week_checks.iter().map(|s| s.problem_id.as_str()).collect();
            let x6 = attempted.len() as f64;
            let x8 = week_checks
                .iter()
                .filter(|s| s.is_correct)
                .map(|s| s.problem_id.as_str())
                .collect::<BTreeSet<_>>()
                .len() as f64;
            let x208 = week_checks.iter().filter(|s| s.is_correct).count() as f64;
            let spans: Vec<f64> = attempted
                .iter()
                .map(|p| {
                    let ts: Vec<i64> = week_checks
                        .iter()
                        .filter(|s| s.problem_id == *p)
                        .map(|s| s.timestamp.secs())
                        .collect();
                    (ts.iter().max().unwrap() - ts.iter().min().unwrap()) as f64
                })
                .collect();
            let leads: Vec<f64> = week_checks
                .iter()
                .filter_map(|s| {
                    cal.problem(&s.problem_id)
                        .map(|p| (p.deadline.secs() - s.timestamp.secs()) as f64)
                })
                .collect();

            let x9 = div(x7, x6);
            let row = vec![
                f64::from(u8::from(last_week >= w)),
                x2 as f64,
                x3,
                x4,
                x5,
                x6,
                x7,
                x8,
                x9,
                div(x2 as f64, x8),
                div(x6, x8),
                mean(&spans),
                x13,
                x3 + x4,
                x15 as f64,
                by_kind[0] as f64,
                by_kind[1] as f64,
                by_kind[2] as f64,
                x201,
                f64::NAN, // x202, filled below
                f64::NAN, // x203
                grade(w, ProblemKind::Homework),
                over_time(w, ProblemKind::Homework),
                grade(w, ProblemKind::Lab),
                over_time(w, ProblemKind::Lab),
                x208,
                div(x208, x7),
                mean(&leads),
            ];
            rows.insert((learner.as_str().to_string(), w), row);
        }
    }

    for w in 1..=weeks {
        let x9s: Vec<f64> = learners
            .iter()
            .map(|l| rows[&(l.as_str().to_string(), w)][8])
            .collect();
        let max = x9s.iter().cloned().fold(0.0, f64::max);
        for l in &learners {
            let row = rows.get_mut(&(l.as_str().to_string(), w)).unwrap();
            let v = row[8];
            row[19] = 100.0 * x9s.iter().filter(|&&d| d <= v).count() as f64 / x9s.len() as f64;
            row[20] = if max == 0.0 { 0.0 } else { 100.0 * v / max };
        }
    }
    rows
}
