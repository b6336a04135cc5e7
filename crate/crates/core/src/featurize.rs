//! Per-learner, per-week feature extraction.
//!
//! Every learner in the store gets one row for each course week. A row holds
//! the stopout indicator `x1` and 27 covariates: `x2..x18` (self-proposed) and
//! `x201..x210` (crowd-proposed). Durations are in seconds, all values finite.
//!
//! Only `check` submissions count as attempts; saves are ignored by every
//! feature. Events outside the course weeks never contribute.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    CollabKind, CollaborationEvent, CourseCalendar, EventStore, LearnerId, LearnerTimeline,
    ObservedEvent, ProblemKind, ResourceKind, SubmissionEvent, Timestamp,
};

/// Cap on an inferred observed-event duration, also given to a learner's last event.
pub const MAX_DURATION_S: i64 = 3600;

pub const NUM_COVARIATES: usize = 27;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureId {
    X1,
    X2,
    X3,
    X4,
    X5,
    X6,
    X7,
    X8,
    X9,
    X10,
    X11,
    X12,
    X13,
    X14,
    X15,
    X16,
    X17,
    X18,
    X201,
    X202,
    X203,
    X204,
    X205,
    X206,
    X207,
    X208,
    X209,
    X210,
}

use FeatureId::*;

impl FeatureId {
    pub const ALL: [FeatureId; 28] = [
        X1, X2, X3, X4, X5, X6, X7, X8, X9, X10, X11, X12, X13, X14, X15, X16, X17, X18, X201,
        X202, X203, X204, X205, X206, X207, X208, X209, X210,
    ];

    /// Covariate order used by feature rows and flattened datasets.
    pub const COVARIATES: [FeatureId; NUM_COVARIATES] = [
        X2, X3, X4, X5, X6, X7, X8, X9, X10, X11, X12, X13, X14, X15, X16, X17, X18, X201, X202,
        X203, X204, X205, X206, X207, X208, X209, X210,
    ];

    pub fn number(self) -> u32 {
        match self {
            X1 => 1,
            X2 => 2,
            X3 => 3,
            X4 => 4,
            X5 => 5,
            X6 => 6,
            X7 => 7,
            X8 => 8,
            X9 => 9,
            X10 => 10,
            X11 => 11,
            X12 => 12,
            X13 => 13,
            X14 => 14,
            X15 => 15,
            X16 => 16,
            X17 => 17,
            X18 => 18,
            X201 => 201,
            X202 => 202,
            X203 => 203,
            X204 => 204,
            X205 => 205,
            X206 => 206,
            X207 => 207,
            X208 => 208,
            X209 => 209,
            X210 => 210,
        }
    }

    /// Position among the 27 covariates; `None` for the label `x1`.
    pub fn covariate_index(self) -> Option<usize> {
        Self::COVARIATES.iter().position(|&f| f == self)
    }

    pub fn from_covariate_index(i: usize) -> FeatureId {
        Self::COVARIATES[i]
    }

    pub fn name(self) -> String {
        format!("x{}", self.number())
    }

    pub fn description(self) -> &'static str {
        match self {
            X1 => "stopout",
            X2 => "total duration",
            X3 => "number forum posts",
            X4 => "number wiki edits",
            X5 => "average length forum post",
            X6 => "number distinct problems submitted",
            X7 => "number submissions",
            X8 => "number distinct problems correct",
            X9 => "average number submissions",
            X10 => "observed event duration per correct problem",
            X11 => "submissions per correct problem",
            X12 => "average time to solve problem",
            X13 => "observed event variance",
            X14 => "number collaborations",
            X15 => "max observed event duration",
            X16 => "total lecture duration",
            X17 => "total book duration",
            X18 => "total wiki duration",
            X201 => "number forum responses",
            X202 => "average number of submissions percentile",
            X203 => "average number of submissions percent",
            X204 => "pset grade",
            X205 => "pset grade over time",
            X206 => "lab grade",
            X207 => "lab grade over time",
            X208 => "number submissions correct",
            X209 => "correct submissions percent",
            X210 => "average predeadline submission time",
        }
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.number())
    }
}

impl FromStr for FeatureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n: u32 = s
            .strip_prefix('x')
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| Error::InvalidInput(format!("bad feature id {s:?}")))?;
        FeatureId::ALL
            .into_iter()
            .find(|f| f.number() == n)
            .ok_or_else(|| Error::InvalidInput(format!("unknown feature id {s:?}")))
    }
}

wire_enum!(
    /// Learner group by lifetime forum/wiki participation.
    Cohort {
        PassiveCollaborator => "passive_collaborator",
        ForumContributor => "forum_contributor",
        WikiContributor => "wiki_contributor",
        FullyCollaborative => "fully_collaborative",
    }
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturizeConfig {
    /// Count forum replies in the average post length `x5` (otherwise posts only).
    pub x5_include_replies: bool,
}

impl Default for FeaturizeConfig {
    fn default() -> Self {
        FeaturizeConfig {
            x5_include_replies: true,
        }
    }
}

/// Warning counts collected during extraction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FeaturizeReport {
    /// Problems whose kind is neither homework nor lab; ignored by grade features.
    pub problems_ignored_by_grades: u64,
    /// In-course checks whose problem has no deadline; skipped by `x210`.
    pub submissions_without_deadline: u64,
    /// Weeks with no assigned homework; `x204` is 0 there for everyone.
    pub weeks_without_homework: Vec<u32>,
    pub weeks_without_lab: Vec<u32>,
    pub out_of_range_events: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub week: u32,
    pub x1: u8,
    pub values: [f64; NUM_COVARIATES],
}

impl FeatureRow {
    pub fn get(&self, f: FeatureId) -> f64 {
        match f.covariate_index() {
            Some(i) => self.values[i],
            None => f64::from(self.x1),
        }
    }
}

/// Rows keyed by (learner, week), stored learner-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    learners: Vec<LearnerId>,
    num_weeks: u32,
    rows: Vec<FeatureRow>,
}

impl FeatureMatrix {
    pub fn new(learners: Vec<LearnerId>, num_weeks: u32, rows: Vec<FeatureRow>) -> Result<Self> {
        if rows.len() != learners.len() * num_weeks as usize {
            return Err(Error::Shape(format!(
                "{} rows for {} learners x {num_weeks} weeks",
                rows.len(),
                learners.len()
            )));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.week as usize != i % num_weeks as usize + 1 {
                return Err(Error::Shape(
                    "rows must be ordered by (learner, week)".into(),
                ));
            }
            if r.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("feature matrix"));
            }
        }
        Ok(FeatureMatrix {
            learners,
            num_weeks,
            rows,
        })
    }

    pub fn learners(&self) -> &[LearnerId] {
        &self.learners
    }

    pub fn num_weeks(&self) -> u32 {
        self.num_weeks
    }

    pub fn rows(&self) -> &[FeatureRow] {
        &self.rows
    }

    pub fn learner_index(&self, id: &LearnerId) -> Option<usize> {
        self.learners.binary_search(id).ok()
    }

    /// Row for learner index `l` and 1-based `week`.
    pub fn row(&self, l: usize, week: u32) -> &FeatureRow {
        &self.rows[l * self.num_weeks as usize + week as usize - 1]
    }

    pub fn learner_rows(&self, l: usize) -> &[FeatureRow] {
        let n = self.num_weeks as usize;
        &self.rows[l * n..(l + 1) * n]
    }

    /// Copy with every value rounded to 9 significant digits, as written to CSV.
    pub fn rounded(&self) -> FeatureMatrix {
        let rows = self
            .rows
            .iter()
            .map(|r| FeatureRow {
                week: r.week,
                x1: r.x1,
                values: r.values.map(round_sig9),
            })
            .collect();
        FeatureMatrix {
            learners: self.learners.clone(),
            num_weeks: self.num_weeks,
            rows,
        }
    }

    pub fn csv_header() -> Vec<String> {
        let mut h = vec!["learner_id".to_string(), "week".to_string()];
        h.extend(FeatureId::ALL.iter().map(|f| f.name()));
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::csv_header())?;
        for (l, id) in self.learners.iter().enumerate() {
            for row in self.learner_rows(l) {
                let mut rec = vec![id.to_string(), row.week.to_string(), row.x1.to_string()];
                rec.extend(row.values.iter().map(|&v| format_sig9(v)));
                w.write_record(&rec)?;
            }
        }
        w.flush()
            .map_err(|e| Error::InvalidInput(format!("writing features: {e}")))?;
        Ok(())
    }

    /// Reads `features.csv`. Rows may come in any order but must cover the full
    /// learner x week grid exactly once.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != Self::csv_header() {
            return Err(Error::InvalidInput(
                "features.csv header does not match the expected columns".into(),
            ));
        }
        let mut by_learner: BTreeMap<LearnerId, BTreeMap<u32, FeatureRow>> = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let learner = LearnerId::new(&rec[0])?;
            let week: u32 = parse_field(&rec[1], "week")?;
            let x1: u8 = parse_field(&rec[2], "x1")?;
            if x1 > 1 {
                return Err(Error::InvalidInput(format!("x1 must be 0 or 1, got {x1}")));
            }
            let mut values = [0.0; NUM_COVARIATES];
            for (i, v) in values.iter_mut().enumerate() {
                *v = parse_field(&rec[3 + i], "feature value")?;
            }
            if by_learner
                .entry(learner)
                .or_default()
                .insert(week, FeatureRow { week, x1, values })
                .is_some()
            {
                return Err(Error::InvalidInput(format!(
                    "duplicate row for week {week}"
                )));
            }
        }
        let num_weeks = by_learner.values().next().map_or(0, |m| m.len() as u32);
        let mut learners = Vec::with_capacity(by_learner.len());
        let mut rows = Vec::new();
        for (id, weeks) in by_learner {
            if weeks.len() as u32 != num_weeks || weeks.keys().copied().ne(1..=num_weeks) {
                return Err(Error::InvalidInput(format!(
                    "learner {id} does not cover weeks 1..={num_weeks}"
                )));
            }
            learners.push(id);
            rows.extend(weeks.into_values());
        }
        FeatureMatrix::new(learners, num_weeks, rows)
    }
}

fn parse_field<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("bad {what} {s:?}")))
}

/// Round to 9 significant decimal digits.
pub fn round_sig9(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v + 0.0;
    }
    format!("{v:.8e}")
        .parse()
        .expect("formatted float reparses")
}

/// Shortest text that reparses to `round_sig9(v)`.
pub fn format_sig9(v: f64) -> String {
    format!("{}", round_sig9(v))
}

/// Durations for time-ordered stamps: the gap to the next event capped at
/// [`MAX_DURATION_S`], and the cap itself for the last event.
pub fn durations_of(stamps: &[Timestamp]) -> Vec<i64> {
    let mut out: Vec<i64> = stamps
        .windows(2)
        .map(|w| (w[1].secs() - w[0].secs()).min(MAX_DURATION_S))
        .collect();
    if !stamps.is_empty() {
        out.push(MAX_DURATION_S);
    }
    out
}

/// Fills `duration_s` on one learner's time-ordered observed events.
pub fn infer_durations(mut events: Vec<ObservedEvent>) -> Vec<ObservedEvent> {
    let stamps: Vec<Timestamp> = events.iter().map(|e| e.timestamp).collect();
    for (e, d) in events.iter_mut().zip(durations_of(&stamps)) {
        e.duration_s = Some(d);
    }
    events
}

/// Last week containing a check submission; 0 if none.
pub fn stopout_week(timeline: &LearnerTimeline<'_>, calendar: &CourseCalendar) -> u32 {
    timeline
        .submissions
        .iter()
        .filter(|s| s.is_attempt())
        .filter_map(|s| calendar.week_of(s.timestamp))
        .max()
        .unwrap_or(0)
}

pub fn feature_x1(stopout_week: u32, week: u32) -> u8 {
    u8::from(stopout_week >= week)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DurationFeatures {
    pub x2: f64,
    pub x15: f64,
    pub x16: f64,
    pub x17: f64,
    pub x18: f64,
}

/// `events` are one learner's observed events for one week, durations set.
pub fn duration_features<'a>(
    events: impl IntoIterator<Item = (&'a ObservedEvent, i64)>,
) -> DurationFeatures {
    let mut out = DurationFeatures::default();
    let (mut total, mut max, mut lecture, mut book, mut wiki) = (0i64, 0i64, 0i64, 0i64, 0i64);
    for (e, d) in events {
        total += d;
        max = max.max(d);
        match e.kind {
            ResourceKind::Lecture => lecture += d,
            ResourceKind::Book => book += d,
            ResourceKind::Wiki => wiki += d,
            _ => {}
        }
    }
    out.x2 = total as f64;
    out.x15 = max as f64;
    out.x16 = lecture as f64;
    out.x17 = book as f64;
    out.x18 = wiki as f64;
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CollaborationFeatures {
    pub x3: f64,
    pub x4: f64,
    pub x5: f64,
    pub x14: f64,
    pub x201: f64,
}

pub fn collaboration_features<'a>(
    events: impl IntoIterator<Item = &'a CollaborationEvent>,
    cfg: &FeaturizeConfig,
) -> CollaborationFeatures {
    let (mut posts, mut replies, mut edits) = (0u64, 0u64, 0u64);
    let (mut chars, mut counted) = (0u64, 0u64);
    for e in events {
        match e.kind {
            CollabKind::ForumPost => posts += 1,
            CollabKind::ForumReply => replies += 1,
            CollabKind::WikiEdit => edits += 1,
        }
        let in_mean = match e.kind {
            CollabKind::ForumPost => true,
            CollabKind::ForumReply => cfg.x5_include_replies,
            CollabKind::WikiEdit => false,
        };
        if in_mean {
            chars += e.content_chars;
            counted += 1;
        }
    }
    CollaborationFeatures {
        x3: posts as f64,
        x4: edits as f64,
        x5: if counted == 0 {
            0.0
        } else {
            chars as f64 / counted as f64
        },
        x14: (posts + edits) as f64,
        x201: replies as f64,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SubmissionFeatures {
    pub x6: f64,
    pub x7: f64,
    pub x8: f64,
    pub x208: f64,
    pub x209: f64,
}

/// `subs` are one learner's check submissions bucketed by submission week.
pub fn submission_features(subs: &[&SubmissionEvent]) -> SubmissionFeatures {
    let distinct: BTreeSet<&str> = subs.iter().map(|s| s.problem_id.as_str()).collect();
    let solved: BTreeSet<&str> = subs
        .iter()
        .filter(|s| s.is_correct)
        .map(|s| s.problem_id.as_str())
        .collect();
    let correct = subs.iter().filter(|s| s.is_correct).count();
    let n = subs.len();
    SubmissionFeatures {
        x6: distinct.len() as f64,
        x7: n as f64,
        x8: solved.len() as f64,
        x208: correct as f64,
        x209: if n == 0 {
            0.0
        } else {
            correct as f64 / n as f64
        },
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RatioFeatures {
    pub x9: f64,
    pub x10: f64,
    pub x11: f64,
    pub x12: f64,
}

fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn ratio_features(
    x2: f64,
    sub: &SubmissionFeatures,
    subs: &[&SubmissionEvent],
) -> RatioFeatures {
    let mut spans: BTreeMap<&str, (i64, i64)> = BTreeMap::new();
    for s in subs {
        let t = s.timestamp.secs();
        let e = spans.entry(s.problem_id.as_str()).or_insert((t, t));
        e.0 = e.0.min(t);
        e.1 = e.1.max(t);
    }
    let x12 = if spans.is_empty() {
        0.0
    } else {
        spans.values().map(|(lo, hi)| (hi - lo) as f64).sum::<f64>() / spans.len() as f64
    };
    RatioFeatures {
        x9: ratio_or_zero(sub.x7, sub.x6),
        x10: ratio_or_zero(x2, sub.x8),
        x11: ratio_or_zero(sub.x6, sub.x8),
        x12,
    }
}

/// Population variance of the events' seconds-after-UTC-midnight; 0 below two events.
pub fn event_variance_x13(stamps: &[Timestamp]) -> f64 {
    if stamps.len() < 2 {
        return 0.0;
    }
    let n = stamps.len() as f64;
    let xs = stamps.iter().map(|t| t.seconds_after_midnight() as f64);
    let mean = xs.clone().sum::<f64>() / n;
    xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// `(x202, x203)` for each entry of one week's `x9` values.
pub fn percentile_features(x9: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = x9.to_vec();
    sorted.sort_by(f64::total_cmp);
    let max = sorted.last().copied().unwrap_or(0.0);
    let n = sorted.len() as f64;
    x9.iter()
        .map(|&v| {
            let at_or_below = sorted.partition_point(|&d| d <= v) as f64;
            let pct = 100.0 * at_or_below / n;
            let of_max = if max == 0.0 { 0.0 } else { 100.0 * (v / max) };
            (pct, of_max)
        })
        .collect()
}

/// Homework and lab problem ids grouped by assigned week (index 0 = week 1).
#[derive(Debug, Clone)]
pub struct WeeklyAssignments {
    pub homework: Vec<Vec<String>>,
    pub lab: Vec<Vec<String>>,
    pub ignored: u64,
}

impl WeeklyAssignments {
    pub fn from_calendar(calendar: &CourseCalendar) -> Self {
        let n = calendar.num_weeks() as usize;
        let mut out = WeeklyAssignments {
            homework: vec![Vec::new(); n],
            lab: vec![Vec::new(); n],
            ignored: 0,
        };
        for p in calendar.problems() {
            let slot = p.assigned_week as usize - 1;
            match p.kind {
                ProblemKind::Homework => out.homework[slot].push(p.problem_id.clone()),
                ProblemKind::Lab => out.lab[slot].push(p.problem_id.clone()),
                ProblemKind::Other => out.ignored += 1,
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradeFeatures {
    pub x204: f64,
    pub x205: f64,
    pub x206: f64,
    pub x207: f64,
}

/// Grade features for every week. `solved` holds the problems the learner
/// answered correctly at any time during the course.
pub fn grade_features(
    solved: &BTreeSet<&str>,
    assignments: &WeeklyAssignments,
) -> Vec<GradeFeatures> {
    let fraction = |ids: &[String]| {
        if ids.is_empty() {
            0.0
        } else {
            ids.iter().filter(|p| solved.contains(p.as_str())).count() as f64 / ids.len() as f64
        }
    };
    let pset: Vec<f64> = assignments
        .homework
        .iter()
        .map(|ids| fraction(ids))
        .collect();
    let lab: Vec<f64> = assignments.lab.iter().map(|ids| fraction(ids)).collect();
    let over_time = |grades: &[f64], w: usize| {
        if w == 0 {
            0.0
        } else {
            grades[w] - grades[..w].iter().sum::<f64>() / w as f64
        }
    };
    (0..pset.len())
        .map(|w| GradeFeatures {
            x204: pset[w],
            x205: over_time(&pset, w),
            x206: lab[w],
            x207: over_time(&lab, w),
        })
        .collect()
}

/// Mean of (deadline − submission time) over the week's checks, and the number
/// of checks skipped because their problem has no deadline.
pub fn predeadline_x210(subs: &[&SubmissionEvent], calendar: &CourseCalendar) -> (f64, u64) {
    let mut total = 0i64;
    let mut n = 0i64;
    let mut skipped = 0u64;
    for s in subs {
        match calendar.problem(&s.problem_id) {
            Some(p) => {
                total += p.deadline.secs() - s.timestamp.secs();
                n += 1;
            }
            None => skipped += 1,
        }
    }
    (if n == 0 { 0.0 } else { total as f64 / n as f64 }, skipped)
}

pub fn assign_cohort(timeline: &LearnerTimeline<'_>) -> Cohort {
    let forum = timeline
        .collaborations
        .iter()
        .any(|c| matches!(c.kind, CollabKind::ForumPost | CollabKind::ForumReply));
    let wiki = timeline
        .collaborations
        .iter()
        .any(|c| c.kind == CollabKind::WikiEdit);
    match (forum, wiki) {
        (false, false) => Cohort::PassiveCollaborator,
        (true, false) => Cohort::ForumContributor,
        (false, true) => Cohort::WikiContributor,
        (true, true) => Cohort::FullyCollaborative,
    }
}

/// Cohort of every learner in the store, keyed by learner id.
pub fn assign_cohorts(store: &EventStore) -> BTreeMap<LearnerId, Cohort> {
    store
        .learners()
        .map(|l| (l.clone(), assign_cohort(&store.learners_sorted_events(l))))
        .collect()
}

pub fn write_cohorts_csv<W: Write>(cohorts: &BTreeMap<LearnerId, Cohort>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["learner_id", "cohort"])?;
    for (l, c) in cohorts {
        w.write_record([l.as_str(), c.as_str()])?;
    }
    w.flush()
        .map_err(|e| Error::InvalidInput(format!("writing cohorts: {e}")))?;
    Ok(())
}

pub fn read_cohorts_csv<R: Read>(input: R) -> Result<BTreeMap<LearnerId, Cohort>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::InvalidInput(
                "cohorts.csv rows need learner_id,cohort".into(),
            ));
        }
        out.insert(LearnerId::new(&rec[0])?, rec[1].parse()?);
    }
    Ok(out)
}

struct LearnerWeeks {
    x1: Vec<u8>,
    values: Vec<[f64; NUM_COVARIATES]>,
    skipped_deadlines: u64,
}

fn set(values: &mut [f64; NUM_COVARIATES], f: FeatureId, v: f64) {
    values[f.covariate_index().expect("covariate")] = v;
}

/// Everything except the cross-learner percentile features.
fn learner_features(
    timeline: &LearnerTimeline<'_>,
    calendar: &CourseCalendar,
    assignments: &WeeklyAssignments,
    cfg: &FeaturizeConfig,
) -> LearnerWeeks {
    let n_weeks = calendar.num_weeks() as usize;
    let stamps: Vec<Timestamp> = timeline.observed.iter().map(|e| e.timestamp).collect();
    let durations = durations_of(&stamps);

    let mut observed: Vec<Vec<(&ObservedEvent, i64)>> = vec![Vec::new(); n_weeks];
    for (e, &d) in timeline.observed.iter().zip(&durations) {
        if let Some(w) = calendar.week_of(e.timestamp) {
            observed[w as usize - 1].push((*e, d));
        }
    }
    let mut checks: Vec<Vec<&SubmissionEvent>> = vec![Vec::new(); n_weeks];
    for s in timeline.submissions.iter().filter(|s| s.is_attempt()) {
        if let Some(w) = calendar.week_of(s.timestamp) {
            checks[w as usize - 1].push(*s);
        }
    }
    let mut collabs: Vec<Vec<&CollaborationEvent>> = vec![Vec::new(); n_weeks];
    for c in &timeline.collaborations {
        if let Some(w) = calendar.week_of(c.timestamp) {
            collabs[w as usize - 1].push(*c);
        }
    }

    let solved: BTreeSet<&str> = checks
        .iter()
        .flatten()
        .filter(|s| s.is_correct)
        .map(|s| s.problem_id.as_str())
        .collect();
    let grades = grade_features(&solved, assignments);
    let stop = stopout_week(timeline, calendar);

    let mut out = LearnerWeeks {
        x1: Vec::with_capacity(n_weeks),
        values: Vec::with_capacity(n_weeks),
        skipped_deadlines: 0,
    };
    for w in 0..n_weeks {
        let mut v = [0.0; NUM_COVARIATES];
        let d = duration_features(observed[w].iter().copied());
        let c = collaboration_features(collabs[w].iter().copied(), cfg);
        let s = submission_features(&checks[w]);
        let r = ratio_features(d.x2, &s, &checks[w]);
        let week_stamps: Vec<Timestamp> = observed[w].iter().map(|(e, _)| e.timestamp).collect();
        let (x210, skipped) = predeadline_x210(&checks[w], calendar);
        out.skipped_deadlines += skipped;
        let g = grades[w];

        for (f, x) in [
            (X2, d.x2),
            (X3, c.x3),
            (X4, c.x4),
            (X5, c.x5),
            (X6, s.x6),
            (X7, s.x7),
            (X8, s.x8),
            (X9, r.x9),
            (X10, r.x10),
            (X11, r.x11),
            (X12, r.x12),
            (X13, event_variance_x13(&week_stamps)),
            (X14, c.x14),
            (X15, d.x15),
            (X16, d.x16),
            (X17, d.x17),
            (X18, d.x18),
            (X201, c.x201),
            (X204, g.x204),
            (X205, g.x205),
            (X206, g.x206),
            (X207, g.x207),
            (X208, s.x208),
            (X209, s.x209),
            (X210, x210),
        ] {
            set(&mut v, f, x);
        }
        out.x1.push(feature_x1(stop, w as u32 + 1));
        out.values.push(v);
    }
    out
}

/// One row per (learner, week) for every learner in the store. Per-learner
/// work runs in parallel; the percentile pass runs per week afterwards.
pub fn extract_all(store: &EventStore, cfg: &FeaturizeConfig) -> (FeatureMatrix, FeaturizeReport) {
    let calendar = store.calendar();
    let assignments = WeeklyAssignments::from_calendar(calendar);
    let learners: Vec<LearnerId> = store.learners().cloned().collect();
    let per_learner: Vec<LearnerWeeks> = learners
        .par_iter()
        .map(|l| {
            learner_features(
                &store.learners_sorted_events(l),
                calendar,
                &assignments,
                cfg,
            )
        })
        .collect();

    let n_weeks = calendar.num_weeks();
    let mut rows: Vec<FeatureRow> = Vec::with_capacity(learners.len() * n_weeks as usize);
    let mut skipped = 0;
    for lw in &per_learner {
        skipped += lw.skipped_deadlines;
        for (w, (&x1, values)) in lw.x1.iter().zip(&lw.values).enumerate() {
            rows.push(FeatureRow {
                week: w as u32 + 1,
                x1,
                values: *values,
            });
        }
    }

    let (i9, i202, i203) = (
        X9.covariate_index().unwrap(),
        X202.covariate_index().unwrap(),
        X203.covariate_index().unwrap(),
    );
    let stride = n_weeks as usize;
    for w in 0..stride {
        let x9: Vec<f64> = (0..learners.len())
            .map(|l| rows[l * stride + w].values[i9])
            .collect();
        for (l, (p, m)) in percentile_features(&x9).into_iter().enumerate() {
            rows[l * stride + w].values[i202] = p;
            rows[l * stride + w].values[i203] = m;
        }
    }

    let report = FeaturizeReport {
        problems_ignored_by_grades: assignments.ignored,
        submissions_without_deadline: skipped,
        weeks_without_homework: week_list(&assignments.homework),
        weeks_without_lab: week_list(&assignments.lab),
        out_of_range_events: store.week_histogram().1 as u64,
    };
    let matrix =
        FeatureMatrix::new(learners, n_weeks, rows).expect("extracted matrix is well formed");
    (matrix, report)
}

fn week_list(by_week: &[Vec<String>]) -> Vec<u32> {
    by_week
        .iter()
        .enumerate()
        .filter(|(_, ids)| ids.is_empty())
        .map(|(w, _)| w as u32 + 1)
        .collect()
}
