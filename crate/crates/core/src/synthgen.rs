//! Seeded synthetic courses in the ingest wire format, plus small fixed fixtures.
//!
//! Each learner carries latent traits (engagement, regularity, accuracy,
//! persistence, earliness) that shape observable behavior and hence specific
//! features. Weekly dropout is a Bernoulli hazard through a logistic link:
//!
//! ```text
//! logit h = base(archetype) − Σ_effects sign(direction) · strength · trait
//! ```
//!
//! so only traits named in `planted_effects` carry signal about stopout.
//!
//! Output directory:
//!
//! ```text
//! events.ndjson           all event lines, canonical (timestamp, learner, seq) order
//! calendar.json           15 weekly boundaries by default
//! problems.csv
//! ground_truth.csv        learner_id,archetype,stopout_week,forum_active,wiki_active
//! ```

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::featurize::FeatureId;
use crate::model::{CourseCalendar, Problem, ProblemKind, Timestamp, CALENDAR_FILE, PROBLEMS_FILE};

pub const EVENTS_FILE: &str = "events.ndjson";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

const WEEK_S: i64 = 7 * 86_400;

wire_enum!(Archetype {
    Completer => "completer",
    GradualDropout => "gradual_dropout",
    Auditor => "auditor",
});

wire_enum!(Direction { Protective => "protective", Risk => "risk" });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchetypeMix {
    pub completer: f64,
    pub gradual_dropout: f64,
    pub auditor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEffect {
    /// One of [`PLANTABLE_FEATURES`].
    #[serde(with = "feature_name")]
    pub feature: FeatureId,
    pub direction: Direction,
    pub strength: f64,
}

mod feature_name {
    use super::FeatureId;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(f: &FeatureId, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&f.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<FeatureId, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Features with a generating trait: total time, time-of-day spread,
/// submissions, accuracy, and how early work is submitted.
pub const PLANTABLE_FEATURES: [FeatureId; 5] = [
    FeatureId::X2,
    FeatureId::X13,
    FeatureId::X7,
    FeatureId::X209,
    FeatureId::X210,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Trait {
    Engagement,
    Regularity,
    Persistence,
    Accuracy,
    Earliness,
}

fn trait_for(f: FeatureId) -> Option<Trait> {
    match f {
        FeatureId::X2 => Some(Trait::Engagement),
        FeatureId::X13 => Some(Trait::Regularity),
        FeatureId::X7 => Some(Trait::Persistence),
        FeatureId::X209 => Some(Trait::Accuracy),
        FeatureId::X210 => Some(Trait::Earliness),
        _ => None,
    }
}

/// Generator settings; every field has a default so a config file may list
/// only what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub num_learners: usize,
    pub num_weeks: u32,
    pub course_start: Timestamp,
    pub archetype_mix: ArchetypeMix,
    pub planted_effects: Vec<PlantedEffect>,
    pub seed: u64,
    pub homework_per_week: u32,
    pub labs_per_week: u32,
    /// Share of learners who ever post or reply in the forum.
    pub forum_fraction: f64,
    /// Share of learners who ever edit the wiki (independent of forum activity).
    pub wiki_fraction: f64,
    /// Weekly dropout logit before planted effects.
    pub completer_base_logit: f64,
    pub gradual_dropout_base_logit: f64,
    pub auditor_base_logit: f64,
    pub mean_sessions_per_week: f64,
    pub mean_events_per_session: f64,
    /// Std of event time-of-day around the learner's preferred time, seconds.
    pub time_of_day_jitter_s: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            num_learners: 500,
            num_weeks: 15,
            course_start: Timestamp::parse_rfc3339("2013-09-02T00:00:00Z").expect("valid literal"),
            archetype_mix: ArchetypeMix {
                completer: 0.35,
                gradual_dropout: 0.5,
                auditor: 0.15,
            },
            planted_effects: Vec::new(),
            seed: 0,
            homework_per_week: 4,
            labs_per_week: 2,
            forum_fraction: 0.2,
            wiki_fraction: 0.1,
            completer_base_logit: -3.5,
            gradual_dropout_base_logit: -1.2,
            auditor_base_logit: -1.0,
            mean_sessions_per_week: 3.0,
            mean_events_per_session: 6.0,
            time_of_day_jitter_s: 5400.0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let m = &self.archetype_mix;
        let fractions = [m.completer, m.gradual_dropout, m.auditor];
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f))
            || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidInput(
                "archetype fractions must be in [0, 1] and sum to 1".into(),
            ));
        }
        if self.num_weeks < 2 {
            return Err(Error::InvalidInput("num_weeks must be at least 2".into()));
        }
        for share in [self.forum_fraction, self.wiki_fraction] {
            if !(0.0..=1.0).contains(&share) {
                return Err(Error::InvalidInput(
                    "forum/wiki fractions must be in [0, 1]".into(),
                ));
            }
        }
        for e in &self.planted_effects {
            if trait_for(e.feature).is_none() {
                return Err(Error::InvalidInput(format!(
                    "feature {} cannot be planted; supported: x2, x7, x13, x209, x210",
                    e.feature
                )));
            }
            if !e.strength.is_finite() || e.strength < 0.0 {
                return Err(Error::InvalidInput(
                    "planted strength must be finite and >= 0".into(),
                ));
            }
        }
        if self.mean_sessions_per_week <= 0.0
            || self.mean_events_per_session <= 0.0
            || self.time_of_day_jitter_s < 0.0
        {
            return Err(Error::InvalidInput(
                "activity parameters must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn calendar(&self) -> Result<CourseCalendar> {
        let mut problems = Vec::new();
        for w in 1..=self.num_weeks {
            let deadline = self.course_start.offset(i64::from(w) * WEEK_S - 3600);
            for k in 1..=self.homework_per_week {
                problems.push(Problem {
                    problem_id: format!("hw{w:02}_{k}"),
                    assigned_week: w,
                    deadline,
                    kind: ProblemKind::Homework,
                });
            }
            for k in 1..=self.labs_per_week {
                problems.push(Problem {
                    problem_id: format!("lab{w:02}_{k}"),
                    assigned_week: w,
                    deadline,
                    kind: ProblemKind::Lab,
                });
            }
        }
        CourseCalendar::uniform(self.course_start, self.num_weeks, WEEK_S, problems)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub learner_id: String,
    pub archetype: Archetype,
    /// Last week with a submission; 0 for learners who never submit.
    pub stopout_week: u32,
    pub forum_active: bool,
    pub wiki_active: bool,
}

#[derive(Debug, Clone)]
pub struct GeneratedCourse {
    /// Wire-format lines in canonical order.
    pub lines: Vec<String>,
    pub calendar: CourseCalendar,
    pub truth: Vec<GroundTruth>,
}

struct Traits {
    engagement: f64,
    regularity: f64,
    persistence: f64,
    accuracy: f64,
    earliness: f64,
}

impl Traits {
    fn get(&self, t: Trait) -> f64 {
        match t {
            Trait::Engagement => self.engagement,
            Trait::Regularity => self.regularity,
            Trait::Persistence => self.persistence,
            Trait::Accuracy => self.accuracy,
            Trait::Earliness => self.earliness,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn learner_id(i: usize) -> String {
    format!("L{i:05}")
}

type Keyed = (i64, usize, u32, String);

struct LearnerSim<'a> {
    cfg: &'a GeneratorConfig,
    cal: &'a CourseCalendar,
    idx: usize,
    rng: ChaCha8Rng,
    out: Vec<Keyed>,
    seq: u32,
}

impl LearnerSim<'_> {
    fn emit(&mut self, t: i64, line: serde_json::Value) {
        self.out.push((t, self.idx, self.seq, line.to_string()));
        self.seq += 1;
    }

    fn stamp(t: i64) -> String {
        Timestamp::from_secs(t)
            .expect("course times are positive")
            .to_rfc3339()
    }

    fn observed_week(&mut self, week: u32, traits: &Traits, preferred_tod: f64, intensity: f64) {
        let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
        let start = self.cal.week_start(week).secs();
        let sessions_mean =
            (self.cfg.mean_sessions_per_week * intensity * (0.35 * traits.engagement).exp())
                .max(0.05);
        let sessions = 1 + Poisson::new(sessions_mean)
            .expect("positive mean")
            .sample(&mut self.rng) as u32;
        let jitter = self.cfg.time_of_day_jitter_s * (0.5 * traits.regularity).exp();
        let gap = Exp::new(1.0 / (90.0 * (0.3 * traits.engagement).exp())).expect("positive rate");
        let events_mean = self.cfg.mean_events_per_session * (0.25 * traits.engagement).exp();
        for _ in 0..sessions {
            let day = self.rng.gen_range(0..7i64);
            let tod = (preferred_tod + jitter * std_normal.sample(&mut self.rng))
                .clamp(0.0, 86_000.0) as i64;
            let mut t = start + day * 86_400 + tod;
            let n = 1 + Poisson::new(events_mean)
                .expect("positive mean")
                .sample(&mut self.rng) as u32;
            for _ in 0..n {
                if t >= start + WEEK_S {
                    break;
                }
                let (kind, action) = match self.rng.gen_range(0..100) {
                    0..=44 => (
                        "lecture",
                        if self.rng.gen_bool(0.5) {
                            "play_video"
                        } else {
                            "pause_video"
                        },
                    ),
                    45..=59 => ("book", "book"),
                    60..=69 => ("wiki", "wiki_view"),
                    70..=79 => ("forum", "forum_view"),
                    80..=94 => ("problem", "problem_show"),
                    _ => (
                        "other",
                        if self.rng.gen_bool(0.5) {
                            "seq_goto"
                        } else {
                            "page_view"
                        },
                    ),
                };
                let resource = format!("r{}", self.rng.gen_range(100..400));
                let line = json!({
                    "learner_id": learner_id(self.idx),
                    "event_type": action,
                    "resource_id": resource,
                    "resource_kind": kind,
                    "timestamp": Self::stamp(t),
                });
                self.emit(t, line);
                t += 1 + gap.sample(&mut self.rng) as i64;
            }
        }
    }

    fn submissions_week(&mut self, week: u32, traits: &Traits) {
        let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
        let start = self.cal.week_start(week).secs();
        let end = self.cal.week_end(week).secs();
        let mut ids: Vec<(String, i64)> = self
            .cal
            .problems()
            .filter(|p| p.assigned_week == week)
            .map(|p| (p.problem_id.clone(), p.deadline.secs()))
            .collect();
        if ids.is_empty() {
            return;
        }
        let keep: Vec<bool> = ids.iter().map(|_| self.rng.gen_bool(0.85)).collect();
        if !keep.iter().any(|&k| k) {
            // active learners attempt at least one problem every week
            let k = self.rng.gen_range(0..ids.len());
            ids = vec![ids.swap_remove(k)];
        } else {
            ids = ids
                .into_iter()
                .zip(keep)
                .filter(|(_, k)| *k)
                .map(|(p, _)| p)
                .collect();
        }
        let p_correct = sigmoid(0.4 + 0.9 * traits.accuracy);
        let p_retry = sigmoid(0.3 + 0.8 * traits.persistence);
        let retry_gap = Exp::new(1.0 / 1200.0).expect("positive rate");
        for (pid, deadline) in ids {
            let hours = (60.0 + 30.0 * traits.earliness + 10.0 * std_normal.sample(&mut self.rng))
                .clamp(1.0, 150.0);
            let mut t = (deadline - (hours * 3600.0) as i64).clamp(start, end - 1);
            for attempt in 0..6 {
                let correct = self.rng.gen_bool(p_correct);
                let line = json!({
                    "learner_id": learner_id(self.idx),
                    "event_type": "problem_check",
                    "problem_id": pid,
                    "correct": correct,
                    "timestamp": Self::stamp(t),
                });
                self.emit(t, line);
                if correct || attempt == 5 || !self.rng.gen_bool(p_retry) {
                    break;
                }
                t = (t + 1 + retry_gap.sample(&mut self.rng) as i64).min(end - 1);
            }
        }
    }

    fn collaborations_week(&mut self, week: u32, forum: bool, wiki: bool, first: bool) {
        let start = self.cal.week_start(week).secs();
        let emit_kind = |sim: &mut Self, kind: &str, count: u64| {
            for _ in 0..count {
                let t = start + sim.rng.gen_range(0..WEEK_S);
                let chars = if kind == "wiki_edit" {
                    0
                } else {
                    sim.rng.gen_range(20..600)
                };
                let body: String = "lorem ipsum ".chars().cycle().take(chars).collect();
                let line = json!({
                    "learner_id": learner_id(sim.idx),
                    "event_type": kind,
                    "body": body,
                    "timestamp": Self::stamp(t),
                });
                sim.emit(t, line);
            }
        };
        if forum {
            let posts = Poisson::new(0.6).expect("positive").sample(&mut self.rng) as u64
                + u64::from(first);
            let replies = Poisson::new(0.8).expect("positive").sample(&mut self.rng) as u64;
            emit_kind(self, "forum_post", posts);
            emit_kind(self, "forum_reply", replies);
        }
        if wiki {
            let edits = Poisson::new(0.5).expect("positive").sample(&mut self.rng) as u64
                + u64::from(first);
            emit_kind(self, "wiki_edit", edits);
        }
    }
}

fn simulate_learner(
    cfg: &GeneratorConfig,
    cal: &CourseCalendar,
    idx: usize,
) -> (Vec<Keyed>, GroundTruth) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(idx as u64);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let u: f64 = rng.gen();
    let mix = &cfg.archetype_mix;
    let archetype = if u < mix.completer {
        Archetype::Completer
    } else if u < mix.completer + mix.gradual_dropout {
        Archetype::GradualDropout
    } else {
        Archetype::Auditor
    };
    let traits = Traits {
        engagement: std_normal.sample(&mut rng),
        regularity: std_normal.sample(&mut rng),
        persistence: std_normal.sample(&mut rng),
        accuracy: std_normal.sample(&mut rng),
        earliness: std_normal.sample(&mut rng),
    };
    let forum = rng.gen_bool(cfg.forum_fraction);
    let wiki = rng.gen_bool(cfg.wiki_fraction);
    let preferred_tod = rng.gen_range(6.0 * 3600.0..23.0 * 3600.0);
    // Dropout uniforms are drawn up front so planted strength changes the
    // hazard without shifting any other random draw.
    let dropout_draws: Vec<f64> = (0..cfg.num_weeks).map(|_| rng.gen()).collect();

    let base = match archetype {
        Archetype::Completer => cfg.completer_base_logit,
        Archetype::GradualDropout => cfg.gradual_dropout_base_logit,
        Archetype::Auditor => cfg.auditor_base_logit,
    };
    let shift: f64 = cfg
        .planted_effects
        .iter()
        .map(|e| {
            let sign = match e.direction {
                Direction::Protective => 1.0,
                Direction::Risk => -1.0,
            };
            sign * e.strength * traits.get(trait_for(e.feature).expect("validated"))
        })
        .sum();
    let hazard = sigmoid(base - shift);

    let mut sim = LearnerSim {
        cfg,
        cal,
        idx,
        rng,
        out: Vec::new(),
        seq: 0,
    };
    let mut last_active = 0;
    for week in 1..=cfg.num_weeks {
        sim.observed_week(week, &traits, preferred_tod, 1.0);
        if archetype != Archetype::Auditor {
            sim.submissions_week(week, &traits);
        }
        sim.collaborations_week(week, forum, wiki, week == 1);
        last_active = week;
        if dropout_draws[week as usize - 1] < hazard {
            break;
        }
    }
    // a little browsing after leaving
    if last_active < cfg.num_weeks && sim.rng.gen_bool(0.3) {
        sim.observed_week(last_active + 1, &traits, preferred_tod, 0.3);
    }

    let truth = GroundTruth {
        learner_id: learner_id(idx),
        archetype,
        stopout_week: if archetype == Archetype::Auditor {
            0
        } else {
            last_active
        },
        forum_active: forum,
        wiki_active: wiki,
    };
    (sim.out, truth)
}

/// Generates a course in memory. Learners are simulated in parallel on
/// independent streams and merged in canonical order.
pub fn generate(cfg: &GeneratorConfig) -> Result<GeneratedCourse> {
    cfg.validate()?;
    let calendar = cfg.calendar()?;
    let per_learner: Vec<(Vec<Keyed>, GroundTruth)> = (0..cfg.num_learners)
        .into_par_iter()
        .map(|i| simulate_learner(cfg, &calendar, i))
        .collect();
    let mut keyed = Vec::new();
    let mut truth = Vec::with_capacity(per_learner.len());
    for (events, t) in per_learner {
        keyed.extend(events);
        truth.push(t);
    }
    keyed.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
    Ok(GeneratedCourse {
        lines: keyed.into_iter().map(|k| k.3).collect(),
        calendar,
        truth,
    })
}

impl GeneratedCourse {
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_event_lines(&dir.join(EVENTS_FILE), &self.lines)?;
        self.calendar
            .write(&dir.join(CALENDAR_FILE), &dir.join(PROBLEMS_FILE))?;
        let path = dir.join(GROUND_TRUTH_FILE);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record([
            "learner_id",
            "archetype",
            "stopout_week",
            "forum_active",
            "wiki_active",
        ])?;
        for t in &self.truth {
            w.write_record([
                t.learner_id.as_str(),
                t.archetype.as_str(),
                &t.stopout_week.to_string(),
                &t.forum_active.to_string(),
                &t.wiki_active.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(())
    }
}

fn write_event_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut f =
        std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for line in lines {
        writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
    }
    f.flush().map_err(|e| Error::io(path, e))
}

/// Hand-counted totals shipped with a fixture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub total_lines: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub learners: u64,
    pub observed: u64,
    pub submissions: u64,
    pub collaborations: u64,
}

pub struct Fixture {
    pub lines: Vec<String>,
    pub calendar: CourseCalendar,
    pub manifest: FixtureManifest,
}

pub const FIXTURE_NAMES: [&str; 3] = ["fig2", "empty", "two_learners_tiny"];

fn ts(text: &str) -> Timestamp {
    Timestamp::parse_rfc3339(text).expect("fixture literal")
}

fn fixture_calendar(problems: Vec<Problem>) -> CourseCalendar {
    CourseCalendar::uniform(ts("2013-09-02T00:00:00Z"), 15, WEEK_S, problems)
        .expect("fixture calendar")
}

/// One learner's two-hour timeline: twelve video/navigation events, three
/// problem checks and a grading echo, 2013-11-10 (course week 10).
fn fig2() -> Fixture {
    let observed = [
        ("08:46:21", "191", "play_video", "lecture"),
        ("08:46:49", "191", "pause_video", "lecture"),
        ("08:47:24", "191", "play_video", "lecture"),
        ("08:51:25", "191", "pause_video", "lecture"),
        ("08:51:48", "191", "play_video", "lecture"),
        ("08:53:08", "198", "seq_goto", "other"),
        ("08:55:05", "284", "pause_video", "lecture"),
        ("08:56:05", "284", "play_video", "lecture"),
        ("09:40:50", "284", "pause_video", "lecture"),
        ("09:41:13", "284", "play_video", "lecture"),
        ("09:41:57", "284", "play_video", "lecture"),
        ("09:53:37", "284", "pause_video", "lecture"),
    ];
    let mut lines: Vec<String> = observed
        .iter()
        .map(|(t, url, ev, kind)| {
            json!({
                "learner_id": "fig2_learner",
                "event_type": ev,
                "resource_id": url,
                "resource_kind": kind,
                "timestamp": format!("2013-11-10T{t}Z"),
            })
            .to_string()
        })
        .collect();
    for (t, pid, correct) in [
        ("10:15:53", "284", false),
        ("10:20:27", "121", true),
        ("10:22:27", "123", true),
    ] {
        lines.push(
            json!({
                "learner_id": "fig2_learner",
                "event_type": "problem_check",
                "problem_id": pid,
                "correct": correct,
                "timestamp": format!("2013-11-10T{t}Z"),
            })
            .to_string(),
        );
    }
    lines.push(
        json!({
            "learner_id": "fig2_learner",
            "event_type": "problem_graded",
            "problem_id": "123",
            "timestamp": "2013-11-10T10:25:50Z",
        })
        .to_string(),
    );
    let deadline = ts("2013-11-10T23:00:00Z");
    let problems = ["121", "123", "284"]
        .into_iter()
        .map(|id| Problem {
            problem_id: id.into(),
            assigned_week: 10,
            deadline,
            kind: ProblemKind::Homework,
        })
        .collect();
    Fixture {
        lines,
        calendar: fixture_calendar(problems),
        manifest: FixtureManifest {
            total_lines: 16,
            accepted: 15,
            rejected: 1,
            learners: 1,
            observed: 12,
            submissions: 3,
            collaborations: 0,
        },
    }
}

fn two_learners_tiny() -> Fixture {
    let lines = [
        r#"{"learner_id":"alice","event_type":"play_video","resource_id":"v1","resource_kind":"lecture","timestamp":"2013-09-02T09:00:00Z"}"#,
        r#"{"learner_id":"alice","event_type":"book","resource_id":"b1","resource_kind":"book","timestamp":"2013-09-02T09:10:00Z"}"#,
        r#"{"learner_id":"alice","event_type":"problem_check","problem_id":"hw1","correct":false,"timestamp":"2013-09-03T20:00:00Z"}"#,
        r#"{"learner_id":"alice","event_type":"problem_check","problem_id":"hw1","correct":true,"timestamp":"2013-09-03T20:05:00Z"}"#,
        r#"{"learner_id":"alice","event_type":"problem_graded","problem_id":"hw1","timestamp":"2013-09-03T20:05:01Z"}"#,
        r#"{"learner_id":"alice","event_type":"wiki_view","resource_id":"w1","resource_kind":"wiki","timestamp":"2013-09-10T18:00:00Z"}"#,
        r#"{"learner_id":"alice","event_type":"forum_post","body":"hello world","timestamp":"2013-09-11T18:00:00Z"}"#,
        r#"{"learner_id":"bob","event_type":"play_video","resource_id":"v1","resource_kind":"lecture","timestamp":"2013-09-04T07:00:00Z"}"#,
        r#"{"learner_id":"bob","event_type":"seq_goto","resource_id":"s1","resource_kind":"other","timestamp":"2013-09-04T07:02:00Z"}"#,
        r#"{"learner_id":"bob","event_type":"wiki_edit","timestamp":"2013-09-05T07:00:00Z"}"#,
        r#"{"learner_id":"bob","event_type":"problem_check","problem_id":"lab2","correct":true}"#,
        r#"{"learner_id":"bob","event_type":"problem_check","problem_id":"lab2","correct":true,"timestamp":"2013-09-12T07:00:00Z"}"#,
    ];
    let problems = vec![
        Problem {
            problem_id: "hw1".into(),
            assigned_week: 1,
            deadline: ts("2013-09-08T23:00:00Z"),
            kind: ProblemKind::Homework,
        },
        Problem {
            problem_id: "lab2".into(),
            assigned_week: 2,
            deadline: ts("2013-09-15T23:00:00Z"),
            kind: ProblemKind::Lab,
        },
    ];
    Fixture {
        lines: lines.iter().map(|s| s.to_string()).collect(),
        calendar: fixture_calendar(problems),
        manifest: FixtureManifest {
            total_lines: 12,
            accepted: 10,
            rejected: 2,
            learners: 2,
            observed: 5,
            submissions: 3,
            collaborations: 2,
        },
    }
}

pub fn fixture(name: &str) -> Result<Fixture> {
    match name {
        "fig2" => Ok(fig2()),
        "two_learners_tiny" => Ok(two_learners_tiny()),
        "empty" => Ok(Fixture {
            lines: Vec::new(),
            calendar: fixture_calendar(Vec::new()),
            manifest: FixtureManifest {
                total_lines: 0,
                accepted: 0,
                rejected: 0,
                learners: 0,
                observed: 0,
                submissions: 0,
                collaborations: 0,
            },
        }),
        other => Err(Error::UnknownFixture(other.to_string())),
    }
}

/// Writes a fixture as an ingest input directory (`events.ndjson`,
/// `calendar.json`, `problems.csv`, `manifest.json`).
pub fn emit_fixture(name: &str, dir: &Path) -> Result<()> {
    let fx = fixture(name)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_event_lines(&dir.join(EVENTS_FILE), &fx.lines)?;
    fx.calendar
        .write(&dir.join(CALENDAR_FILE), &dir.join(PROBLEMS_FILE))?;
    let mut text = serde_json::to_string_pretty(&fx.manifest)?;
    text.push('\n');
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}
