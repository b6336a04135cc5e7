#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Gaussian design with labels drawn from a logistic model with `weights`
/// (zero entries are noise covariates).
pub fn logistic_data(
    n: usize,
    weights: &[f64],
    intercept: f64,
    seed: u64,
) -> (Array2<f64>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = weights.len();
    let x = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
    let y = x
        .rows()
        .into_iter()
        .map(|row| {
            let eta: f64 = row.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>() + intercept;
            u8::from(rng.gen::<f64>() < 1.0 / (1.0 + (-eta).exp()))
        })
        .collect();
    (x, y)
}

/// Mean logistic loss written with plain loops, independent of the library.
pub fn naive_loss(x: &Array2<f64>, y: &[u8], w: &[f64], b: f64) -> f64 {
    let mut total = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let eta: f64 = (0..w.len()).map(|j| x[[i, j]] * w[j]).sum::<f64>() + b;
        let s = if yi == 1 { 1.0 } else { -1.0 };
        total += (1.0 + (-s * eta).exp()).ln();
    }
    total / y.len() as f64
}

/// Gradient of [`naive_loss`] with respect to (w, b), plain loops.
pub fn naive_gradient(x: &Array2<f64>, y: &[u8], w: &[f64], b: f64) -> (Vec<f64>, f64) {
    let n = y.len() as f64;
    let mut g = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let eta: f64 = (0..w.len()).map(|j| x[[i, j]] * w[j]).sum::<f64>() + b;
        let r = 1.0 / (1.0 + (-eta).exp()) - f64::from(yi);
        for (j, gj) in g.iter_mut().enumerate() {
            *gj += r * x[[i, j]] / n;
        }
        gb += r / n;
    }
    (g, gb)
}

/// Independent check of the subgradient optimality conditions.
pub fn naive_certificate(x: &Array2<f64>, y: &[u8], penalties: &[f64], w: &[f64], b: f64) -> f64 {
    let (g, gb) = naive_gradient(x, y, w, b);
    let mut worst = gb.abs();
    for j in 0..w.len() {
        let v = if w[j] == 0.0 {
            g[j].abs() - penalties[j]
        } else {
            (g[j] + penalties[j] * w[j].signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Column z-scoring with population std.
pub fn zscore(x: &mut Array2<f64>) {
    let n = x.nrows() as f64;
    for mut col in x.columns_mut() {
        let mean = col.sum() / n;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        col.mapv_inplace(|v| (v - mean) / sd);
    }
}

pub mod oracle;

use stopout_core::featurize::{FeatureId, FeatureMatrix};
use stopout_core::model::{
    CollabKind, CollaborationEvent, CourseCalendar, EventStore, LearnerId, ObservedEvent, Problem,
    ProblemKind, ResourceKind, SubmissionEvent, SubmissionKind, Timestamp,
};

pub const WEEK: i64 = 7 * 86_400;

pub fn course_start() -> Timestamp {
    Timestamp::parse_rfc3339("2013-09-02T00:00:00Z").unwrap()
}

/// Random store with ties, out-of-range events, saves, unknown problems,
/// "other" problems and weeks without homework or labs.
pub fn random_store(seed: u64, learners: usize, weeks: u32) -> EventStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = course_start();
    let mut problems = Vec::new();
    for w in 1..=weeks {
        let kinds = [
            (ProblemKind::Homework, rng.gen_range(0..4)),
            (ProblemKind::Lab, rng.gen_range(0..3)),
            (ProblemKind::Other, rng.gen_range(0..2)),
        ];
        for (kind, count) in kinds {
            for k in 0..count {
                let deadline = start.offset(i64::from(w) * WEEK - rng.gen_range(0..86_400));
                problems.push(Problem {
                    problem_id: format!("{kind}{w}_{k}"),
                    assigned_week: w,
                    deadline,
                    kind,
                });
            }
        }
    }
    let mut ids: Vec<String> = problems.iter().map(|p| p.problem_id.clone()).collect();
    ids.push("ghost".into());
    let calendar = CourseCalendar::uniform(start, weeks, WEEK, problems).unwrap();

    let span = i64::from(weeks) * WEEK;
    let when = |rng: &mut ChaCha8Rng| {
        // coarse grid so equal timestamps are common
        let t = rng.gen_range(-86_400..span + 86_400);
        start.offset(t - t.rem_euclid(if rng.gen_bool(0.3) { 600 } else { 1 }))
    };
    let (mut obs, mut subs, mut collabs) = (Vec::new(), Vec::new(), Vec::new());
    for l in 0..learners {
        let learner = LearnerId::new(format!("u{l:03}")).unwrap();
        for _ in 0..rng.gen_range(0..40) {
            let kind = ResourceKind::ALL[rng.gen_range(0..ResourceKind::ALL.len())];
            let timestamp = when(&mut rng);
            obs.push(ObservedEvent {
                learner: learner.clone(),
                action: "page_view".into(),
                resource_id: "r".into(),
                kind,
                timestamp,
                duration_s: None,
            });
        }
        for _ in 0..rng.gen_range(0..25) {
            let timestamp = when(&mut rng);
            subs.push(SubmissionEvent {
                learner: learner.clone(),
                problem_id: ids[rng.gen_range(0..ids.len())].clone(),
                timestamp,
                is_correct: rng.gen_bool(0.4),
                kind: if rng.gen_bool(0.85) {
                    SubmissionKind::Check
                } else {
                    SubmissionKind::Save
                },
            });
        }
        for _ in 0..rng.gen_range(0..4) {
            let kind = CollabKind::ALL[rng.gen_range(0..CollabKind::ALL.len())];
            let timestamp = when(&mut rng);
            collabs.push(CollaborationEvent {
                learner: learner.clone(),
                timestamp,
                kind,
                content_chars: rng.gen_range(0..300),
            });
        }
    }
    EventStore::new(obs, subs, collabs, calendar)
}

/// Row-wise identities, ranges and x1 monotonicity.
pub fn check_identities(m: &FeatureMatrix) -> Result<(), String> {
    use FeatureId::*;
    for (l, id) in m.learners().iter().enumerate() {
        let mut prev_x1 = 1;
        for r in m.learner_rows(l) {
            let g = |f: FeatureId| r.get(f);
            let ctx = format!("{id} week {}", r.week);
            if r.values.iter().any(|v| !v.is_finite()) {
                return Err(format!("{ctx}: non-finite value"));
            }
            if g(X14) != g(X3) + g(X4) {
                return Err(format!("{ctx}: x14 != x3 + x4"));
            }
            if g(X6) > 0.0 && (g(X9) * g(X6) - g(X7)).abs() > 1e-9 * g(X7).max(1.0) {
                return Err(format!("{ctx}: x9 * x6 != x7"));
            }
            if g(X7) > 0.0 && (g(X209) * g(X7) - g(X208)).abs() > 1e-9 * g(X208).max(1.0) {
                return Err(format!("{ctx}: x209 * x7 != x208"));
            }
            for f in [
                X2, X3, X4, X6, X7, X8, X12, X13, X14, X15, X16, X17, X18, X201, X208,
            ] {
                if g(f) < 0.0 {
                    return Err(format!("{ctx}: {f} negative"));
                }
            }
            for f in [X204, X206, X209] {
                if !(0.0..=1.0).contains(&g(f)) {
                    return Err(format!("{ctx}: {f} outside [0, 1]"));
                }
            }
            for f in [X202, X203] {
                if !(0.0..=100.0).contains(&g(f)) {
                    return Err(format!("{ctx}: {f} outside [0, 100]"));
                }
            }
            for f in [X205, X207] {
                if !(-1.0..=1.0).contains(&g(f)) {
                    return Err(format!("{ctx}: {f} outside [-1, 1]"));
                }
            }
            if g(X15) > 3600.0 || (g(X2) > 0.0 && g(X15) > g(X2)) {
                return Err(format!("{ctx}: duration cap"));
            }
            if r.x1 > prev_x1 {
                return Err(format!("{ctx}: x1 increased"));
            }
            prev_x1 = r.x1;
        }
    }
    Ok(())
}
