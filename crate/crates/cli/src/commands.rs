//! Subcommand bodies. Each one names its manifest directory first so that a
//! failure later on still leaves a manifest behind.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde_json::json;
use stopout_core::dataset::{build_dataset, enumerate_problems, PredictionDataset, PredictionSpec};
use stopout_core::featurize::{
    assign_cohorts, extract_all, read_cohorts_csv, write_cohorts_csv, Cohort, FeatureId,
    FeatureMatrix, FeaturizeReport,
};
use stopout_core::ingest::{event_files, ingest_directory};
use stopout_core::model::{EventStore, LearnerId, PROBLEMS_FILE};
use stopout_core::stability::{
    rank_features, read_importance_csv, rlr_run, week_invariant_importance, Lambda,
    SelectionProfile,
};
use stopout_core::synthgen::{emit_fixture, generate};

use crate::config::{self, RunConfig};
use crate::manifest::Recorder;
use crate::{Cli, Command, UsageError, EXIT_DATA, EXIT_INTERNAL, EXIT_OK, EXIT_USAGE};

pub const FEATURES_FILE: &str = "features.csv";
pub const COHORTS_FILE: &str = "cohorts.csv";
pub const CURATION_FILE: &str = "curation_report.json";
pub const FEATURIZE_REPORT_FILE: &str = "featurize_report.json";
pub const SWEEP_LOG_FILE: &str = "sweep_log.csv";
pub const REPORT_FILE: &str = "report.csv";

/// Input that parses but cannot support the requested computation.
#[derive(Debug)]
pub struct DataError(pub String);

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if cause.is::<DataError>()
            || cause.is::<std::io::Error>()
            || cause.is::<serde_json::Error>()
        {
            return EXIT_DATA;
        }
        if let Some(e) = cause.downcast_ref::<stopout_core::Error>() {
            return match e {
                stopout_core::Error::UnknownFixture(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            };
        }
    }
    EXIT_INTERNAL
}

pub fn execute(cli: Cli) -> u8 {
    let mut rec = Recorder::new(cli.command.name(), std::env::args().collect());
    let result = run(&cli, &mut rec);
    let code = match &result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = classify(e);
            rec.fail(code, format!("{e:#}"));
            code
        }
    };
    if let Err(e) = rec.write() {
        eprintln!("error: writing run manifest: {e:#}");
        return if code == EXIT_OK { EXIT_INTERNAL } else { code };
    }
    code
}

fn run(cli: &Cli, rec: &mut Recorder) -> anyhow::Result<()> {
    let mut cfg = config::resolve(cli.config.as_deref(), cli.seed, cli.jobs)?;
    if let Some(p) = &cli.config {
        rec.input(p)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()?;
    let outcome = pool
        .install(|| std::panic::catch_unwind(AssertUnwindSafe(|| dispatch(cli, &mut cfg, rec))));
    rec.manifest.config = serde_json::to_value(&cfg)?;
    match outcome {
        Ok(result) => result,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            Err(anyhow!("internal error: {msg}"))
        }
    }
}

fn require_out(cli: &Cli) -> anyhow::Result<&Path> {
    cli.out
        .as_deref()
        .ok_or_else(|| UsageError(format!("`{}` needs --out", cli.command.name())).into())
}

fn parse_cohort(text: &str) -> anyhow::Result<Cohort> {
    text.parse().map_err(|_| {
        let names: Vec<&str> = Cohort::ALL.iter().map(|c| c.as_str()).collect();
        UsageError(format!(
            "unknown cohort {text:?}; expected one of {}",
            names.join(", ")
        ))
        .into()
    })
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn write_with(
    rec: &mut Recorder,
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> stopout_core::Result<()>,
) -> anyhow::Result<()> {
    let mut w =
        BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    f(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush()
        .with_context(|| format!("writing {}", path.display()))?;
    rec.output(path);
    Ok(())
}

fn write_json(
    rec: &mut Recorder,
    path: &Path,
    value: &impl serde::Serialize,
) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    rec.output(path);
    Ok(())
}

fn dispatch(cli: &Cli, cfg: &mut RunConfig, rec: &mut Recorder) -> anyhow::Result<()> {
    match &cli.command {
        Command::Ingest { events, calendar } => ingest(require_out(cli)?, events, calendar, rec),
        Command::Synth { learners, weeks } => {
            if let Some(n) = learners {
                cfg.synth.num_learners = *n;
            }
            if let Some(w) = weeks {
                cfg.synth.num_weeks = *w;
            }
            synth(require_out(cli)?, cfg, rec)
        }
        Command::Fixture { name } => {
            let out = require_out(cli)?;
            rec.set_dir(out)?;
            rec.stage("fixture", || Ok(emit_fixture(name, out)?))?;
            rec.output(out);
            Ok(())
        }
        Command::Featurize { store } => {
            let out = require_out(cli)?;
            let (features_path, dir) = if out.is_dir() {
                (out.join(FEATURES_FILE), out.to_path_buf())
            } else {
                let parent = out
                    .parent()
                    .filter(|p| !p.as_os_str().is_empty())
                    .unwrap_or(Path::new("."));
                (out.to_path_buf(), parent.to_path_buf())
            };
            rec.set_dir(&dir)?;
            featurize(store, &features_path, &dir, cfg, rec).map(|_| ())
        }
        Command::Dataset {
            features,
            cohorts,
            lead,
            lag,
            cohort,
        } => {
            let spec = PredictionSpec::new(*lead, *lag, parse_cohort(cohort)?)
                .map_err(|e| UsageError(e.to_string()))?;
            dataset(require_out(cli)?, features, cohorts, spec, rec)
        }
        Command::Rlr {
            dataset,
            lambda,
            lambda_scale,
            alpha,
            trials,
        } => {
            if let Some(l) = lambda {
                cfg.rlr.lambda = Lambda::Fixed(*l);
            }
            if let Some(s) = lambda_scale {
                cfg.rlr.lambda = Lambda::ScaledMax(*s);
            }
            if let Some(a) = alpha {
                cfg.rlr.alpha = *a;
            }
            if let Some(t) = trials {
                cfg.rlr.n_trials = *t;
            }
            rlr(require_out(cli)?, dataset, cfg, rec)
        }
        Command::Importance { cohort, input } => {
            let cohort = parse_cohort(cohort)?;
            importance(require_out(cli)?, input, cohort, cfg, rec)
        }
        Command::Sweep { store, horizon } => {
            if let Some(h) = horizon {
                cfg.horizon = *h;
            }
            sweep(require_out(cli)?, store, cfg, rec)
        }
        Command::Report { input } => report(require_out(cli)?, input, rec),
    }
}

fn ingest(out: &Path, events: &Path, calendar: &Path, rec: &mut Recorder) -> anyhow::Result<()> {
    rec.set_dir(out)?;
    for f in event_files(events)? {
        rec.input(&f)?;
    }
    rec.input(calendar)?;
    let problems = calendar
        .parent()
        .unwrap_or(Path::new("."))
        .join(PROBLEMS_FILE);
    if problems.is_file() {
        rec.input(&problems)?;
    }
    let (store, report) = rec.stage("ingest", || Ok(ingest_directory(events, calendar)?))?;
    rec.stage("write_store", || Ok(store.write_dir(out)?))?;
    rec.output(out);
    report.write(&out.join(CURATION_FILE))?;
    rec.output(&out.join(CURATION_FILE));
    if report.rejected > 0 {
        rec.warn(format!(
            "{} of {} lines rejected: {:?}",
            report.rejected, report.total, report.rejects_by_reason
        ));
    }
    if report.out_of_range > 0 {
        rec.warn(format!(
            "{} events fall outside the course weeks and are excluded from features",
            report.out_of_range
        ));
    }
    if report.unknown_problem > 0 {
        rec.warn(format!(
            "{} submissions reference problems missing from the problem table",
            report.unknown_problem
        ));
    }
    rec.manifest.summary = json!({
        "lines": report.total,
        "accepted": report.accepted,
        "rejected": report.rejected,
        "learners": store.num_learners(),
    });
    Ok(())
}

fn synth(out: &Path, cfg: &RunConfig, rec: &mut Recorder) -> anyhow::Result<()> {
    cfg.synth
        .validate()
        .map_err(|e| UsageError(format!("synth config: {e}")))?;
    rec.set_dir(out)?;
    let course = rec.stage("generate", || Ok(generate(&cfg.synth)?))?;
    rec.stage("write", || Ok(course.write_dir(out)?))?;
    rec.output(out);
    let mut archetypes: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &course.truth {
        *archetypes.entry(t.archetype.as_str()).or_default() += 1;
    }
    rec.manifest.summary = json!({
        "learners": course.truth.len(),
        "weeks": cfg.synth.num_weeks,
        "event_lines": course.lines.len(),
        "archetypes": archetypes,
    });
    Ok(())
}

fn featurize_warnings(report: &FeaturizeReport, rec: &mut Recorder) {
    if report.problems_ignored_by_grades > 0 {
        rec.warn(format!(
            "{} problems of kind `other` are ignored by grade features",
            report.problems_ignored_by_grades
        ));
    }
    if report.submissions_without_deadline > 0 {
        rec.warn(format!(
            "{} checks reference problems without a deadline and are skipped in x210",
            report.submissions_without_deadline
        ));
    }
    if !report.weeks_without_homework.is_empty() {
        rec.warn(format!(
            "weeks without homework (x204 = 0): {:?}",
            report.weeks_without_homework
        ));
    }
    if !report.weeks_without_lab.is_empty() {
        rec.warn(format!(
            "weeks without labs (x206 = 0): {:?}",
            report.weeks_without_lab
        ));
    }
    if report.out_of_range_events > 0 {
        rec.warn(format!(
            "{} events outside the course weeks were excluded",
            report.out_of_range_events
        ));
    }
}

fn featurize(
    store_dir: &Path,
    features_path: &Path,
    dir: &Path,
    cfg: &RunConfig,
    rec: &mut Recorder,
) -> anyhow::Result<(FeatureMatrix, BTreeMap<LearnerId, Cohort>)> {
    rec.input(store_dir)?;
    let store = rec.stage("load_store", || Ok(EventStore::load_dir(store_dir)?))?;
    let ((matrix, report), cohorts) = rec.stage("featurize", || {
        Ok((extract_all(&store, &cfg.featurize), assign_cohorts(&store)))
    })?;
    write_with(rec, features_path, |w| matrix.write_csv(w))?;
    write_with(rec, &dir.join(COHORTS_FILE), |w| {
        write_cohorts_csv(&cohorts, w)
    })?;
    write_json(rec, &dir.join(FEATURIZE_REPORT_FILE), &report)?;
    featurize_warnings(&report, rec);
    let mut counts: BTreeMap<&str, usize> = Cohort::ALL.iter().map(|c| (c.as_str(), 0)).collect();
    for c in cohorts.values() {
        *counts.entry(c.as_str()).or_default() += 1;
    }
    rec.manifest.summary = json!({
        "learners": matrix.learners().len(),
        "weeks": matrix.num_weeks(),
        "cohorts": counts,
    });
    Ok((matrix, cohorts))
}

fn dataset(
    out: &Path,
    features: &Path,
    cohorts: &Path,
    spec: PredictionSpec,
    rec: &mut Recorder,
) -> anyhow::Result<()> {
    rec.set_dir(out)?;
    rec.input(features)?;
    rec.input(cohorts)?;
    let matrix = FeatureMatrix::read_csv(open(features)?)
        .with_context(|| format!("reading {}", features.display()))?;
    let cohort_map = read_cohorts_csv(open(cohorts)?)
        .with_context(|| format!("reading {}", cohorts.display()))?;
    let ds = rec
        .stage("dataset", || Ok(build_dataset(spec, &matrix, &cohort_map)?))?
        .ok_or_else(|| {
            DataError(format!(
                "{spec}: no learner of the cohort is active through week {}",
                spec.lag
            ))
        })?;
    if !ds.has_both_classes() {
        rec.warn(format!("{spec}: all {} labels are equal", ds.len()));
    }
    let path = out.join(format!("dataset_{}.csv", spec.file_stem()));
    write_with(rec, &path, |w| ds.write_csv(w))?;
    rec.manifest.summary =
        json!({ "rows": ds.len(), "positives": ds.positives(), "covariates": ds.num_covariates() });
    Ok(())
}

fn profile_warnings(profile: &SelectionProfile, rec: &mut Recorder) {
    if profile.failed_trials > 0 {
        rec.warn(format!(
            "{}: {} trials never drew both classes",
            profile.spec, profile.failed_trials
        ));
    }
    if profile.unconverged_fits > 0 {
        rec.warn(format!(
            "{}: {} fits hit the iteration limit",
            profile.spec, profile.unconverged_fits
        ));
    }
}

fn rlr(out: &Path, dataset_path: &Path, cfg: &RunConfig, rec: &mut Recorder) -> anyhow::Result<()> {
    cfg.rlr
        .validate()
        .map_err(|e| UsageError(format!("rlr settings: {e}")))?;
    let stem = dataset_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let spec = PredictionSpec::parse_stem(&stem).ok_or_else(|| {
        UsageError(format!(
            "dataset file name {stem:?} must contain lead<L>_lag<G>_<cohort>"
        ))
    })?;
    rec.set_dir(out)?;
    rec.input(dataset_path)?;
    let ds = PredictionDataset::read_csv(open(dataset_path)?, spec)
        .with_context(|| format!("reading {}", dataset_path.display()))?;
    let profile = rec.stage("rlr", || Ok(rlr_run(&ds, &cfg.rlr)?))?;
    profile_warnings(&profile, rec);
    let path = out.join(format!("selection_{}.csv", spec.file_stem()));
    write_with(rec, &path, |w| profile.write_csv(w))?;
    rec.manifest.summary =
        json!({ "rows": ds.len(), "positives": ds.positives(), "lambda": profile.lambda });
    Ok(())
}

/// `selection_*.csv` files in `dir` for one cohort, in canonical order.
fn selection_files(dir: &Path, cohort: Cohort) -> anyhow::Result<Vec<(PathBuf, PredictionSpec)>> {
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        if !(name.starts_with("selection_") && name.ends_with(".csv")) {
            continue;
        }
        if let Some(spec) = PredictionSpec::parse_stem(&name) {
            if spec.cohort == cohort {
                found.push((path, spec));
            }
        }
    }
    found.sort_by_key(|(_, s)| (s.lag, s.lead));
    Ok(found)
}

fn importance(
    out: &Path,
    input: &Path,
    cohort: Cohort,
    cfg: &RunConfig,
    rec: &mut Recorder,
) -> anyhow::Result<()> {
    rec.set_dir(out)?;
    let mut profiles = Vec::new();
    for (path, spec) in selection_files(input, cohort)? {
        rec.input(&path)?;
        let p = SelectionProfile::read_csv(open(&path)?, spec, cfg.rlr.n_trials)
            .with_context(|| format!("reading {}", path.display()))?;
        profiles.push(p);
    }
    if profiles.is_empty() {
        rec.warn(format!(
            "no selection files for {cohort} in {}; importance is uniform",
            input.display()
        ));
    }
    let report = rec.stage("importance", || Ok(week_invariant_importance(&profiles)?))?;
    let path = out.join(format!("importance_{cohort}.csv"));
    write_with(rec, &path, |w| report.write_csv(w))?;
    rec.manifest.summary = json!({ "experiments": report.n_experiments() });
    Ok(())
}

enum SlotOutcome {
    Ran {
        profile: SelectionProfile,
        rows: usize,
        positives: usize,
    },
    Empty,
    SingleClass {
        rows: usize,
        positives: usize,
    },
}

fn run_slot(
    spec: PredictionSpec,
    matrix: &FeatureMatrix,
    cohorts: &BTreeMap<LearnerId, Cohort>,
    cfg: &RunConfig,
) -> stopout_core::Result<SlotOutcome> {
    let Some(ds) = build_dataset(spec, matrix, cohorts)? else {
        log::info!("{spec}: no eligible learners");
        return Ok(SlotOutcome::Empty);
    };
    let (rows, positives) = (ds.len(), ds.positives());
    if !ds.has_both_classes() {
        log::info!("{spec}: single-class labels");
        return Ok(SlotOutcome::SingleClass { rows, positives });
    }
    let profile = rlr_run(&ds, &cfg.rlr)?;
    log::info!("{spec}: {rows} rows, lambda {}", profile.lambda);
    Ok(SlotOutcome::Ran {
        profile,
        rows,
        positives,
    })
}

fn sweep(out: &Path, store_dir: &Path, cfg: &RunConfig, rec: &mut Recorder) -> anyhow::Result<()> {
    cfg.rlr
        .validate()
        .map_err(|e| UsageError(format!("rlr settings: {e}")))?;
    if cfg.horizon < 2 {
        return Err(UsageError("horizon must be at least 2".into()).into());
    }
    rec.set_dir(out)?;
    let (matrix, cohorts) = featurize(store_dir, &out.join(FEATURES_FILE), out, cfg, rec)?;
    if cfg.horizon > matrix.num_weeks() {
        return Err(DataError(format!(
            "horizon {} needs at least {0} course weeks; the store has {}",
            cfg.horizon,
            matrix.num_weeks()
        ))
        .into());
    }
    // the same values a file-based featurize/dataset/rlr pipeline would see
    let matrix = matrix.rounded();

    let slots: Vec<PredictionSpec> = Cohort::ALL
        .iter()
        .flat_map(|&c| {
            enumerate_problems(cfg.horizon)
                .into_iter()
                .map(move |(lead, lag)| (lead, lag, c))
        })
        .map(|(lead, lag, c)| PredictionSpec::new(lead, lag, c))
        .collect::<stopout_core::Result<_>>()?;
    let outcomes = rec.stage("experiments", || {
        Ok(slots
            .par_iter()
            .map(|&spec| run_slot(spec, &matrix, &cohorts, cfg))
            .collect::<stopout_core::Result<Vec<_>>>()?)
    })?;

    let log_path = out.join(SWEEP_LOG_FILE);
    let mut log = csv::Writer::from_path(&log_path)
        .with_context(|| format!("creating {}", log_path.display()))?;
    log.write_record([
        "cohort",
        "lead",
        "lag",
        "status",
        "rows",
        "positives",
        "lambda",
        "failed_trials",
        "unconverged_fits",
    ])?;
    let mut by_cohort: BTreeMap<Cohort, Vec<SelectionProfile>> = BTreeMap::new();
    let (mut ran, mut empty, mut single) = (0, 0, 0);
    for (spec, outcome) in slots.iter().zip(outcomes) {
        let base = [
            spec.cohort.to_string(),
            spec.lead.to_string(),
            spec.lag.to_string(),
        ];
        let rest: [String; 6] = match &outcome {
            SlotOutcome::Ran {
                profile,
                rows,
                positives,
            } => [
                "ok".into(),
                rows.to_string(),
                positives.to_string(),
                profile.lambda.to_string(),
                profile.failed_trials.to_string(),
                profile.unconverged_fits.to_string(),
            ],
            SlotOutcome::Empty => [
                "skipped_empty".into(),
                "0".into(),
                "0".into(),
                String::new(),
                String::new(),
                String::new(),
            ],
            SlotOutcome::SingleClass { rows, positives } => [
                "skipped_single_class".into(),
                rows.to_string(),
                positives.to_string(),
                String::new(),
                String::new(),
                String::new(),
            ],
        };
        log.write_record(base.iter().chain(&rest))?;
        match outcome {
            SlotOutcome::Ran { profile, .. } => {
                ran += 1;
                profile_warnings(&profile, rec);
                let path = out.join(format!("selection_{}.csv", spec.file_stem()));
                write_with(rec, &path, |w| profile.write_csv(w))?;
                by_cohort.entry(spec.cohort).or_default().push(profile);
            }
            SlotOutcome::Empty => empty += 1,
            SlotOutcome::SingleClass { .. } => single += 1,
        }
    }
    log.flush()?;
    rec.output(&log_path);

    let mut per_cohort = serde_json::Map::new();
    for &cohort in Cohort::ALL {
        let profiles = by_cohort.remove(&cohort).unwrap_or_default();
        if profiles.is_empty() {
            rec.warn(format!(
                "{cohort}: no experiment could run; importance is uniform"
            ));
        }
        let report = week_invariant_importance(&profiles)?;
        let path = out.join(format!("importance_{cohort}.csv"));
        write_with(rec, &path, |w| report.write_csv(w))?;
        let top: Vec<String> = report
            .ranked()
            .iter()
            .take(5)
            .map(|(f, _)| f.name())
            .collect();
        per_cohort.insert(
            cohort.to_string(),
            json!({ "experiments": report.n_experiments(), "top5": top }),
        );
    }
    rec.manifest.summary = json!({
        "horizon": cfg.horizon,
        "slots": slots.len(),
        "ran": ran,
        "skipped_empty": empty,
        "skipped_single_class": single,
        "cohorts": per_cohort,
    });
    Ok(())
}

fn print_tables(tables: &[(Cohort, Vec<(FeatureId, f64)>)]) -> std::io::Result<()> {
    let stdout = std::io::stdout();
    let mut o = stdout.lock();
    for (cohort, ranked) in tables {
        writeln!(o, "{cohort}")?;
        writeln!(
            o,
            "{:>4}  {:<7} {:>10}  description",
            "rank", "feature", "weight"
        )?;
        for (i, (f, w)) in ranked.iter().enumerate() {
            writeln!(
                o,
                "{:>4}  {:<7} {:>10.6}  {}",
                i + 1,
                f.name(),
                w,
                f.description()
            )?;
        }
        let top: Vec<String> = ranked.iter().take(5).map(|(f, _)| f.name()).collect();
        writeln!(o, "top 5: {}\n", top.join(", "))?;
    }
    o.flush()
}

fn report(out: &Path, input: &Path, rec: &mut Recorder) -> anyhow::Result<()> {
    rec.set_dir(out)?;
    let mut tables = Vec::new();
    for &cohort in Cohort::ALL {
        let path = input.join(format!("importance_{cohort}.csv"));
        if !path.is_file() {
            continue;
        }
        rec.input(&path)?;
        let weights = read_importance_csv(open(&path)?)
            .with_context(|| format!("malformed {}", path.display()))?;
        tables.push((cohort, rank_features(&weights)));
    }
    if tables.is_empty() {
        return Err(DataError(format!(
            "no importance_<cohort>.csv files in {}",
            input.display()
        ))
        .into());
    }

    if let Err(e) = print_tables(&tables) {
        // a closed pager or `head` is not a failure
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            return Err(e).context("writing report to stdout");
        }
    }

    let path = out.join(REPORT_FILE);
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["cohort", "rank", "feature", "weight", "description"])?;
    for (cohort, ranked) in &tables {
        for (i, (f, weight)) in ranked.iter().enumerate() {
            w.write_record([
                cohort.as_str(),
                &(i + 1).to_string(),
                &f.name(),
                &weight.to_string(),
                f.description(),
            ])?;
        }
    }
    w.flush()?;
    rec.output(&path);
    let top: serde_json::Map<String, serde_json::Value> = tables
        .iter()
        .map(|(c, r)| {
            (
                c.to_string(),
                json!(r.iter().take(5).map(|(f, _)| f.name()).collect::<Vec<_>>()),
            )
        })
        .collect();
    rec.manifest.summary = json!({ "top5": top });
    Ok(())
}
