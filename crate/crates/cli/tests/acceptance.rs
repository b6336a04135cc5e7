//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, with the
//! measured value, elapsed time and time budget. Exits nonzero if any fails.
//!
//! Run with `cargo test -p stopout-cli --test acceptance`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stopout_core::dataset::{enumerate_problems, PredictionDataset, PredictionSpec};
use stopout_core::featurize::{
    assign_cohorts, durations_of, extract_all, round_sig9, Cohort, FeatureId, FeatureMatrix,
    FeaturizeConfig,
};
use stopout_core::ingest::ingest_directory;
use stopout_core::model::{CollabKind, EventStore, LearnerId};
use stopout_core::stability::{
    covariate_names, fit_weighted_l1_logreg, null_gradient_bound, objective, rlr_run,
    smooth_gradient, RlrConfig, SolverOptions,
};
use stopout_core::synthgen::{generate, GeneratorConfig};
use tempfile::TempDir;

// Tolerances and budgets.
const FD_REL_TOL: f64 = 1e-5;
const CERT_TOL: f64 = 1e-7;
const GRID_TOL: f64 = 1e-3;
const PLANTED_MIN_PROB: f64 = 0.8;
const NOISE_MAX_PROB: f64 = 0.3;
const TOP_K: usize = 5;
const INSTANT: u64 = 5;

type Check = fn(&Path) -> Result<String, String>;

fn stopout(root: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_stopout"))
        .args(args)
        .current_dir(root)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "`stopout {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn enumeration(root: &Path) -> Result<String, String> {
    let pairs = enumerate_problems(14);
    let distinct: BTreeSet<_> = pairs.iter().collect();
    ensure(pairs.len() == 91 && distinct.len() == 91, || {
        format!("{} pairs", pairs.len())
    })?;
    ensure(
        pairs
            .iter()
            .all(|&(lead, lag)| lead >= 1 && lag >= 1 && lead + lag <= 14),
        || "pair out of range".into(),
    )?;

    stopout(root, &["fixture", "two_learners_tiny", "--out", "c1_raw"])?;
    stopout(
        root,
        &[
            "ingest",
            "--events",
            "c1_raw",
            "--calendar",
            "c1_raw/calendar.json",
            "--out",
            "c1_store",
        ],
    )?;
    stopout(
        root,
        &[
            "sweep",
            "--store",
            "c1_store",
            "--horizon",
            "14",
            "--out",
            "c1_sweep",
        ],
    )?;
    let log = fs::read_to_string(root.join("c1_sweep/sweep_log.csv")).map_err(|e| e.to_string())?;
    let slots = log.lines().count() - 1;
    ensure(slots == 364, || format!("sweep logged {slots} slots"))?;
    Ok(format!("91 pairs, sweep attempted {slots} slots"))
}

fn fig2(root: &Path) -> Result<String, String> {
    stopout(root, &["fixture", "fig2", "--out", "c2_raw"])?;
    stopout(
        root,
        &[
            "ingest",
            "--events",
            "c2_raw",
            "--calendar",
            "c2_raw/calendar.json",
            "--out",
            "c2_store",
        ],
    )?;
    stopout(
        root,
        &[
            "featurize",
            "--store",
            "c2_store",
            "--out",
            "c2_store/features.csv",
        ],
    )?;
    let store = EventStore::load_dir(&root.join("c2_store")).map_err(|e| e.to_string())?;
    let learner = LearnerId::new("fig2_learner").unwrap();
    let stamps: Vec<_> = store
        .learners_sorted_events(&learner)
        .observed
        .iter()
        .map(|e| e.timestamp)
        .collect();
    let d = durations_of(&stamps);
    ensure(
        d.len() == 12 && d[0] == 28 && d[1] == 35 && d[11] == 3600,
        || format!("durations {d:?}"),
    )?;
    let file = fs::File::open(root.join("c2_store/features.csv")).map_err(|e| e.to_string())?;
    let m = FeatureMatrix::read_csv(file).map_err(|e| e.to_string())?;
    let l = m
        .learner_index(&learner)
        .ok_or("learner missing from features")?;
    let x7 = m.row(l, 10).get(FeatureId::X7);
    ensure(x7 == 3.0, || format!("x7 = {x7}"))?;
    Ok(format!(
        "durations {}s, {}s ... {}s; x7 = {x7}",
        d[0], d[1], d[11]
    ))
}

fn compare_with_oracle(store: &EventStore) -> Result<usize, String> {
    let (m, _) = extract_all(store, &FeaturizeConfig::default());
    let oracle = common::oracle::naive_features(store, true);
    let mut compared = 0;
    for (l, id) in m.learners().iter().enumerate() {
        for r in m.learner_rows(l) {
            let want = &oracle[&(id.as_str().to_string(), r.week)];
            ensure(f64::from(r.x1) == want[0], || {
                format!("{id} week {} x1", r.week)
            })?;
            for (j, f) in FeatureId::COVARIATES.iter().enumerate() {
                let (got, exp) = (round_sig9(r.values[j]), round_sig9(want[j + 1]));
                ensure(got == exp, || {
                    format!("{id} week {} {f}: {got} vs oracle {exp}", r.week)
                })?;
                compared += 1;
            }
        }
    }
    Ok(compared)
}

fn feature_oracle(_: &Path) -> Result<String, String> {
    let store = common::random_store(2024, 20, 4);
    ensure(store.num_learners() == 20, || {
        "store must hold 20 learners".into()
    })?;
    let n = compare_with_oracle(&store)?;
    Ok(format!(
        "{n} values equal after 9-significant-digit rounding"
    ))
}

fn identities(_: &Path) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut rows = 0;
    for i in 0..1000 {
        let store = common::random_store(rng.gen(), rng.gen_range(1..=12), rng.gen_range(2..=6));
        let (m, _) = extract_all(&store, &FeaturizeConfig::default());
        common::check_identities(&m).map_err(|e| format!("store {i}: {e}"))?;
        rows += m.rows().len();
    }
    Ok(format!("1000 stores, {rows} rows"))
}

fn optimizer(_: &Path) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_fd = 0.0f64;
    for inst in 0..50u64 {
        let n = rng.gen_range(5..=100);
        let p = rng.gen_range(1..=20);
        let truth: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (x, y) = common::logistic_data(n, &truth, 0.2, 100 + inst);
        let w: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = rng.gen_range(-0.5..0.5);
        let (g, gb) = smooth_gradient(x.view(), &y, Array1::from(w.clone()).view(), b);
        let h = 1e-5;
        let mut fd = Vec::new();
        for j in 0..p {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[j] += h;
            down[j] -= h;
            fd.push(
                (common::naive_loss(&x, &y, &up, b) - common::naive_loss(&x, &y, &down, b))
                    / (2.0 * h),
            );
        }
        fd.push(
            (common::naive_loss(&x, &y, &w, b + h) - common::naive_loss(&x, &y, &w, b - h))
                / (2.0 * h),
        );
        let analytic: Vec<f64> = g.iter().copied().chain([gb]).collect();
        let scale = analytic
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-8);
        let err = analytic
            .iter()
            .zip(&fd)
            .fold(0.0f64, |m, (a, f)| m.max((a - f).abs()))
            / scale;
        worst_fd = worst_fd.max(err);
    }
    ensure(worst_fd < FD_REL_TOL, || {
        format!("finite-difference relative error {worst_fd:e}")
    })?;

    let opts = SolverOptions {
        tol: CERT_TOL,
        ..SolverOptions::default()
    };
    let mut worst_cert = 0.0f64;
    let mut solved = 0;
    for inst in 0..50u64 {
        let n = rng.gen_range(20..=100);
        let p = rng.gen_range(1..=20);
        let truth: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let (x, y) = common::logistic_data(n, &truth, 0.0, 200 + inst);
        if y.iter().all(|&v| v == y[0]) {
            continue;
        }
        let lam = null_gradient_bound(x.view(), &y);
        let pen: Vec<f64> = (0..p)
            .map(|_| rng.gen_range(0.05 * lam..0.5 * lam))
            .collect();
        let m = fit_weighted_l1_logreg(x.view(), &y, &pen, &opts).map_err(|e| e.to_string())?;
        let cert =
            common::naive_certificate(&x, &y, &pen, m.weights.as_slice().unwrap(), m.intercept);
        worst_cert = worst_cert.max(cert);
        solved += 1;
    }
    // the oracle sums in a different order, so allow rounding on top of the tolerance
    ensure(worst_cert <= CERT_TOL + 1e-12, || {
        format!("certificate violation {worst_cert:e}")
    })?;

    let (mut x, y) = common::logistic_data(200, &[1.0, -0.5, 0.0, 0.3], 0.4, 5);
    common::zscore(&mut x);
    let beta = null_gradient_bound(x.view(), &y) * (1.0 + 1e-9) + 1e-12;
    let m = fit_weighted_l1_logreg(x.view(), &y, &[beta; 4], &opts).map_err(|e| e.to_string())?;
    ensure(m.weights.iter().all(|&w| w == 0.0), || {
        format!("weights above the null bound: {:?}", m.weights)
    })?;

    let (x, y) = common::logistic_data(40, &[1.5, -1.0], 0.3, 40);
    let pen = [0.1, 0.1];
    let m = fit_weighted_l1_logreg(x.view(), &y, &pen, &opts).map_err(|e| e.to_string())?;
    let fitted = objective(x.view(), &y, &pen, &m);
    let best_b = |w: [f64; 2]| {
        let mut b = 0.0f64;
        for _ in 0..50 {
            let (mut g, mut h) = (0.0, 0.0);
            for (i, &yi) in y.iter().enumerate() {
                let s = 1.0 / (1.0 + (-(x[[i, 0]] * w[0] + x[[i, 1]] * w[1] + b)).exp());
                g += s - f64::from(yi);
                h += s * (1.0 - s);
            }
            let step = g / h.max(1e-12);
            b -= step;
            if step.abs() < 1e-13 {
                break;
            }
        }
        b
    };
    let mut grid = f64::INFINITY;
    for i in 0..=1000 {
        for k in 0..=1000 {
            let w = [-5.0 + 0.01 * i as f64, -5.0 + 0.01 * k as f64];
            let v = common::naive_loss(&x, &y, &w, best_b(w))
                + pen[0] * w[0].abs()
                + pen[1] * w[1].abs();
            grid = grid.min(v);
        }
    }
    ensure((fitted - grid).abs() < GRID_TOL, || {
        format!("solver {fitted} vs grid {grid}")
    })?;
    Ok(format!(
        "fd rel err {worst_fd:.1e}; certificate {worst_cert:.1e} on {solved} fits; null bound gives zeros; grid gap {:.1e}",
        (fitted - grid).abs()
    ))
}

fn recovery(_: &Path) -> Result<String, String> {
    let planted = [(0usize, 1.5), (9, -1.5), (26, 1.2)];
    let mut weights = [0.0; 27];
    for &(j, w) in &planted {
        weights[j] = w;
    }
    let (mut x, y) = common::logistic_data(2000, &weights, 0.0, 606);
    common::zscore(&mut x);
    let ds = PredictionDataset {
        spec: PredictionSpec::new(1, 1, Cohort::PassiveCollaborator).unwrap(),
        covariate_names: covariate_names(1),
        scaler: vec![(0.0, 1.0); 27],
        learner_ids: (0..2000)
            .map(|i| LearnerId::new(format!("l{i}")).unwrap())
            .collect(),
        x,
        y,
    };
    let prof = rlr_run(
        &ds,
        &RlrConfig {
            seed: 2013,
            n_trials: 200,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let min_planted = planted
        .iter()
        .map(|&(j, _)| prof.probs[j])
        .fold(1.0, f64::min);
    let max_noise = (0..27)
        .filter(|j| planted.iter().all(|&(p, _)| p != *j))
        .map(|j| prof.probs[j])
        .fold(0.0, f64::max);
    ensure(
        min_planted >= PLANTED_MIN_PROB && max_noise <= NOISE_MAX_PROB,
        || format!("planted min {min_planted}, noise max {max_noise}"),
    )?;
    Ok(format!(
        "planted min {min_planted:.3}, noise max {max_noise:.3}"
    ))
}

const PLANTED_CONFIG: &str = r#"{
  "seed": 42,
  "synth": {
    "num_learners": 500,
    "num_weeks": 8,
    "planted_effects": [{"feature": "x210", "direction": "protective", "strength": 2.0}]
  }
}"#;

fn planted_sweep(root: &Path, jobs: &str, out: &str) -> Result<(), String> {
    if !root.join("c7_store").is_dir() {
        fs::write(root.join("planted.json"), PLANTED_CONFIG).map_err(|e| e.to_string())?;
        stopout(
            root,
            &["--config", "planted.json", "synth", "--out", "c7_course"],
        )?;
        stopout(
            root,
            &[
                "ingest",
                "--events",
                "c7_course",
                "--calendar",
                "c7_course/calendar.json",
                "--out",
                "c7_store",
            ],
        )?;
    }
    stopout(
        root,
        &[
            "--config",
            "planted.json",
            "--jobs",
            jobs,
            "sweep",
            "--store",
            "c7_store",
            "--horizon",
            "6",
            "--out",
            out,
        ],
    )
}

fn csv_files(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let p = entry.map_err(|e| e.to_string())?.path();
        if p.extension().is_some_and(|x| x == "csv") {
            out.insert(
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).map_err(|e| e.to_string())?,
            );
        }
    }
    Ok(out)
}

fn determinism(root: &Path) -> Result<String, String> {
    planted_sweep(root, "1", "c7_sweep_a")?;
    planted_sweep(root, "3", "c7_sweep_b")?;
    let (a, b) = (
        csv_files(&root.join("c7_sweep_a"))?,
        csv_files(&root.join("c7_sweep_b"))?,
    );
    ensure(a.keys().eq(b.keys()), || {
        "different report file sets".into()
    })?;
    for (name, bytes) in &a {
        ensure(&b[name] == bytes, || {
            format!("{name} differs between --jobs 1 and --jobs 3")
        })?;
    }
    Ok(format!(
        "{} CSV files byte-identical across --jobs 1 and --jobs 3",
        a.len()
    ))
}

fn check_partition(store: &EventStore) -> Result<(), String> {
    let cohorts = assign_cohorts(store);
    let learners: BTreeSet<&LearnerId> = cohorts.keys().collect();
    ensure(learners == store.learner_set(), || {
        "cohorts do not cover exactly the learners with events".into()
    })?;
    let forum: BTreeSet<&LearnerId> = store
        .collaborations()
        .iter()
        .filter(|c| c.kind != CollabKind::WikiEdit)
        .map(|c| &c.learner)
        .collect();
    let wiki: BTreeSet<&LearnerId> = store
        .collaborations()
        .iter()
        .filter(|c| c.kind == CollabKind::WikiEdit)
        .map(|c| &c.learner)
        .collect();
    let count = |c: Cohort| cohorts.values().filter(|&&v| v == c).count();
    let expected = [
        (
            Cohort::FullyCollaborative,
            forum.intersection(&wiki).count(),
        ),
        (Cohort::ForumContributor, forum.difference(&wiki).count()),
        (Cohort::WikiContributor, wiki.difference(&forum).count()),
        (
            Cohort::PassiveCollaborator,
            learners.len() - forum.union(&wiki).count(),
        ),
    ];
    for (c, n) in expected {
        ensure(count(c) == n, || {
            format!("{c}: {} assigned, {n} by direct query", count(c))
        })?;
    }
    Ok(())
}

fn partition(root: &Path) -> Result<String, String> {
    let mut learners = 0;
    for seed in 0..200u64 {
        let store = common::random_store(seed, (seed % 40) as usize, 3);
        check_partition(&store)?;
        learners += store.num_learners();
    }
    let cfg = GeneratorConfig {
        num_learners: 400,
        num_weeks: 6,
        seed: 8,
        ..Default::default()
    };
    let course = generate(&cfg).map_err(|e| e.to_string())?;
    let dir = root.join("c8_course");
    course.write_dir(&dir).map_err(|e| e.to_string())?;
    let (store, _) =
        ingest_directory(&dir, &dir.join("calendar.json")).map_err(|e| e.to_string())?;
    check_partition(&store)?;
    Ok(format!(
        "200 random stores and a generated course, {} learners partitioned",
        learners + store.num_learners()
    ))
}

fn planted_signal(root: &Path) -> Result<String, String> {
    if !root
        .join("c7_sweep_a/importance_passive_collaborator.csv")
        .is_file()
    {
        planted_sweep(root, "1", "c7_sweep_a")?;
    }
    stopout(
        root,
        &["report", "--in", "c7_sweep_a", "--out", "c9_report"],
    )?;
    let text = fs::read_to_string(root.join("c9_report/report.csv")).map_err(|e| e.to_string())?;
    let mut rank = None;
    let mut top = Vec::new();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols[0] != "passive_collaborator" {
            continue;
        }
        let r: usize = cols[1].parse().map_err(|_| format!("bad rank in {line}"))?;
        if r <= TOP_K {
            top.push(cols[2].to_string());
        }
        if cols[2] == "x210" {
            rank = Some(r);
        }
    }
    let rank = rank.ok_or("x210 missing from the passive report")?;
    ensure(rank <= TOP_K, || {
        format!("x210 ranked {rank}; top 5 {top:?}")
    })?;
    Ok(format!(
        "x210 ranked {rank} for passive_collaborator; top 5 {}",
        top.join(", ")
    ))
}

fn main() {
    let criteria: [(u32, &str, u64, Check); 9] = [
        (1, "enumeration", INSTANT, enumeration),
        (2, "fig2 fixture", INSTANT, fig2),
        (3, "feature oracle equivalence", 5, feature_oracle),
        (4, "feature identities and ranges", 60, identities),
        (5, "optimizer", 30, optimizer),
        (6, "stability-selection recovery", 180, recovery),
        (7, "sweep determinism", 600, determinism),
        (8, "cohort partition", INSTANT, partition),
        (9, "planted-signal finding", 600, planted_signal),
    ];
    let root = TempDir::new().expect("temporary directory");
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| check(root.path())))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let elapsed = start.elapsed();
        let (verdict, detail) = match result {
            Ok(_) if elapsed > Duration::from_secs(budget) => {
                ("FAIL", "over time budget".to_string())
            }
            Ok(d) => ("PASS", d),
            Err(e) => ("FAIL", e),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!(
            "criterion {id} {verdict} {name}: {detail} ({:.1}s, budget {budget}s)",
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
