//! Domain types and the file-backed event store.
//!
//! A store is a directory holding three NDJSON event tables, a problem table
//! and the course calendar:
//!
//! ```text
//! STORE/
//!   observed_events.ndjson
//!   submissions.ndjson
//!   collaborations.ndjson
//!   problems.csv        problem_id,assigned_week,deadline,kind
//!   calendar.json       {"num_weeks": 15, "week_starts": ["2013-09-02T00:00:00Z", ...]}
//! ```
//!
//! The event tables use the same line schema that [`crate::ingest`] accepts, so a
//! store directory is itself valid ingest input.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds since the Unix epoch, UTC. Sub-second input precision is truncated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "TimestampRepr", into = "String")]
pub struct Timestamp(i64);

impl Timestamp {
    pub fn from_secs(secs: i64) -> Result<Self> {
        if secs < 0 {
            return Err(Error::InvalidTimestamp(format!(
                "negative epoch seconds {secs}"
            )));
        }
        Ok(Timestamp(secs))
    }

    pub fn secs(self) -> i64 {
        self.0
    }

    /// Parses an RFC-3339 timestamp, truncating fractional seconds.
    pub fn parse_rfc3339(text: &str) -> Result<Self> {
        let dt = DateTime::parse_from_rfc3339(text.trim())
            .map_err(|e| Error::InvalidTimestamp(format!("{text:?}: {e}")))?;
        Timestamp::from_secs(dt.timestamp())
    }

    pub fn to_rfc3339(self) -> String {
        DateTime::<Utc>::from_timestamp(self.0, 0)
            .expect("timestamp within chrono range")
            .to_rfc3339_opts(SecondsFormat::Secs, true)
    }

    /// Seconds elapsed since the preceding UTC midnight.
    pub fn seconds_after_midnight(self) -> i64 {
        self.0.rem_euclid(86_400)
    }

    pub fn offset(self, delta: i64) -> Self {
        Timestamp(self.0 + delta)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_rfc3339())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TimestampRepr {
    Text(String),
    Secs(i64),
}

impl TryFrom<TimestampRepr> for Timestamp {
    type Error = Error;

    fn try_from(value: TimestampRepr) -> Result<Self> {
        match value {
            TimestampRepr::Text(s) => Timestamp::parse_rfc3339(&s),
            TimestampRepr::Secs(s) => Timestamp::from_secs(s),
        }
    }
}

impl From<Timestamp> for String {
    fn from(t: Timestamp) -> String {
        t.to_rfc3339()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LearnerId(String);

impl LearnerId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::InvalidInput("learner id must be non-empty".into()));
        }
        Ok(LearnerId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LearnerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

macro_rules! wire_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, ::serde::Serialize, ::serde::Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl ::std::str::FromStr for $name {
            type Err = $crate::error::Error;

            fn from_str(s: &str) -> ::std::result::Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err($crate::error::Error::InvalidInput(format!(
                        concat!("unknown ", stringify!($name), " {:?}"),
                        other
                    ))),
                }
            }
        }

        impl ::std::fmt::Display for $name {
            fn fmt(&self, f: &mut ::std::fmt::Formatter<'_>) -> ::std::fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

wire_enum!(
    /// Kind of resource an observed event touched.
    ResourceKind {
        Lecture => "lecture",
        Book => "book",
        Wiki => "wiki",
        Forum => "forum",
        Problem => "problem",
        Other => "other",
    }
);

wire_enum!(SubmissionKind { Check => "check", Save => "save" });

wire_enum!(CollabKind {
    ForumPost => "forum_post",
    ForumReply => "forum_reply",
    WikiEdit => "wiki_edit",
});

wire_enum!(ProblemKind { Homework => "homework", Lab => "lab", Other => "other" });

/// A browsing-mode interaction. `duration_s` is filled in by duration inference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedEvent {
    pub learner: LearnerId,
    /// Raw `event_type` from the log (`play_video`, `seq_goto`, ...).
    pub action: String,
    pub resource_id: String,
    pub kind: ResourceKind,
    pub timestamp: Timestamp,
    pub duration_s: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmissionEvent {
    pub learner: LearnerId,
    pub problem_id: String,
    pub timestamp: Timestamp,
    pub is_correct: bool,
    pub kind: SubmissionKind,
}

impl SubmissionEvent {
    /// Saves are stored but are not graded attempts.
    pub fn is_attempt(&self) -> bool {
        self.kind == SubmissionKind::Check
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollaborationEvent {
    pub learner: LearnerId,
    pub timestamp: Timestamp,
    pub kind: CollabKind,
    /// Unicode scalar values in the body text.
    pub content_chars: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub problem_id: String,
    pub assigned_week: u32,
    pub deadline: Timestamp,
    pub kind: ProblemKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CourseCalendar {
    num_weeks: u32,
    week_starts: Vec<Timestamp>,
    problems: BTreeMap<String, Problem>,
}

#[derive(Serialize, Deserialize)]
struct CalendarFile {
    num_weeks: u32,
    week_starts: Vec<Timestamp>,
}

impl CourseCalendar {
    pub fn new(week_starts: Vec<Timestamp>, problems: Vec<Problem>) -> Result<Self> {
        if week_starts.len() < 2 {
            return Err(Error::InvalidCalendar(
                "need at least one week (two boundaries)".into(),
            ));
        }
        if week_starts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidCalendar(
                "week_starts must be strictly increasing".into(),
            ));
        }
        let num_weeks = (week_starts.len() - 1) as u32;
        let mut table = BTreeMap::new();
        for p in problems {
            if p.assigned_week == 0 || p.assigned_week > num_weeks {
                return Err(Error::InvalidCalendar(format!(
                    "problem {} assigned to week {} outside 1..={num_weeks}",
                    p.problem_id, p.assigned_week
                )));
            }
            if p.deadline < week_starts[p.assigned_week as usize - 1] {
                return Err(Error::InvalidCalendar(format!(
                    "problem {} deadline precedes its assigned week",
                    p.problem_id
                )));
            }
            if table.insert(p.problem_id.clone(), p).is_some() {
                return Err(Error::InvalidCalendar("duplicate problem_id".into()));
            }
        }
        Ok(CourseCalendar {
            num_weeks,
            week_starts,
            problems: table,
        })
    }

    /// Evenly spaced weeks of `week_len_s` seconds.
    pub fn uniform(
        start: Timestamp,
        num_weeks: u32,
        week_len_s: i64,
        problems: Vec<Problem>,
    ) -> Result<Self> {
        let starts = (0..=num_weeks as i64)
            .map(|w| start.offset(w * week_len_s))
            .collect();
        CourseCalendar::new(starts, problems)
    }

    pub fn num_weeks(&self) -> u32 {
        self.num_weeks
    }

    pub fn week_starts(&self) -> &[Timestamp] {
        &self.week_starts
    }

    /// Start of 1-based `week`.
    pub fn week_start(&self, week: u32) -> Timestamp {
        self.week_starts[week as usize - 1]
    }

    /// Exclusive end of 1-based `week`.
    pub fn week_end(&self, week: u32) -> Timestamp {
        self.week_starts[week as usize]
    }

    pub fn problems(&self) -> impl Iterator<Item = &Problem> {
        self.problems.values()
    }

    pub fn problem(&self, id: &str) -> Option<&Problem> {
        self.problems.get(id)
    }

    /// 1-based week containing `t` under half-open intervals, or `None` when `t`
    /// falls before the first week or at/after the end of the last one.
    pub fn week_of(&self, t: Timestamp) -> Option<u32> {
        let first = *self.week_starts.first()?;
        let end = *self.week_starts.last()?;
        if t < first || t >= end {
            return None;
        }
        // partition_point gives the count of boundaries <= t, which is the week index.
        Some(self.week_starts.partition_point(|s| *s <= t) as u32)
    }

    pub fn load(calendar_path: &Path, problems_path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(calendar_path).map_err(|e| Error::io(calendar_path, e))?;
        let file: CalendarFile = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidCalendar(format!("{}: {e}", calendar_path.display())))?;
        if file.week_starts.len() != file.num_weeks as usize + 1 {
            return Err(Error::InvalidCalendar(format!(
                "{}: num_weeks={} needs {} week_starts, found {}",
                calendar_path.display(),
                file.num_weeks,
                file.num_weeks + 1,
                file.week_starts.len()
            )));
        }
        let problems = if problems_path.exists() {
            read_problems(problems_path)?
        } else {
            Vec::new()
        };
        CourseCalendar::new(file.week_starts, problems)
    }

    pub fn write(&self, calendar_path: &Path, problems_path: &Path) -> Result<()> {
        let file = CalendarFile {
            num_weeks: self.num_weeks,
            week_starts: self.week_starts.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        std::fs::write(calendar_path, text).map_err(|e| Error::io(calendar_path, e))?;
        let mut w = csv::Writer::from_path(problems_path)?;
        w.write_record(["problem_id", "assigned_week", "deadline", "kind"])?;
        for p in self.problems.values() {
            w.write_record([
                p.problem_id.as_str(),
                &p.assigned_week.to_string(),
                &p.deadline.to_rfc3339(),
                p.kind.as_str(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(problems_path, e))?;
        Ok(())
    }
}

#[derive(Deserialize)]
struct ProblemRow {
    problem_id: String,
    assigned_week: u32,
    deadline: String,
    kind: String,
}

fn read_problems(path: &Path) -> Result<Vec<Problem>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: ProblemRow = row?;
        // Unknown kinds are kept as `other`; grade features ignore them and count a warning.
        let kind = row.kind.parse().unwrap_or(ProblemKind::Other);
        out.push(Problem {
            problem_id: row.problem_id,
            assigned_week: row.assigned_week,
            deadline: Timestamp::parse_rfc3339(&row.deadline)?,
            kind,
        });
    }
    Ok(out)
}

/// Per-mode event sequences of one learner in canonical order.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct LearnerTimeline<'a> {
    pub observed: Vec<&'a ObservedEvent>,
    pub submissions: Vec<&'a SubmissionEvent>,
    pub collaborations: Vec<&'a CollaborationEvent>,
}

#[derive(Debug, Default, Clone, PartialEq)]
struct LearnerIndex {
    observed: Vec<usize>,
    submissions: Vec<usize>,
    collaborations: Vec<usize>,
}

/// Curated events plus the calendar. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStore {
    observed: Vec<ObservedEvent>,
    submissions: Vec<SubmissionEvent>,
    collaborations: Vec<CollaborationEvent>,
    calendar: CourseCalendar,
    index: BTreeMap<LearnerId, LearnerIndex>,
}

pub const OBSERVED_FILE: &str = "observed_events.ndjson";
pub const SUBMISSIONS_FILE: &str = "submissions.ndjson";
pub const COLLABORATIONS_FILE: &str = "collaborations.ndjson";
pub const PROBLEMS_FILE: &str = "problems.csv";
pub const CALENDAR_FILE: &str = "calendar.json";

impl EventStore {
    /// Builds a store. Each table is sorted by timestamp, then learner, then
    /// the remaining fields, so the result does not depend on input order.
    pub fn new(
        mut observed: Vec<ObservedEvent>,
        mut submissions: Vec<SubmissionEvent>,
        mut collaborations: Vec<CollaborationEvent>,
        calendar: CourseCalendar,
    ) -> Self {
        observed.sort_by(|a, b| {
            (
                a.timestamp,
                &a.learner,
                a.kind,
                &a.action,
                &a.resource_id,
                a.duration_s,
            )
                .cmp(&(
                    b.timestamp,
                    &b.learner,
                    b.kind,
                    &b.action,
                    &b.resource_id,
                    b.duration_s,
                ))
        });
        submissions.sort_by(|a, b| {
            (a.timestamp, &a.learner, &a.problem_id, a.kind, a.is_correct).cmp(&(
                b.timestamp,
                &b.learner,
                &b.problem_id,
                b.kind,
                b.is_correct,
            ))
        });
        collaborations.sort_by(|a, b| {
            (a.timestamp, &a.learner, a.kind, a.content_chars).cmp(&(
                b.timestamp,
                &b.learner,
                b.kind,
                b.content_chars,
            ))
        });

        let mut index: BTreeMap<LearnerId, LearnerIndex> = BTreeMap::new();
        for (i, e) in observed.iter().enumerate() {
            index.entry(e.learner.clone()).or_default().observed.push(i);
        }
        for (i, e) in submissions.iter().enumerate() {
            index
                .entry(e.learner.clone())
                .or_default()
                .submissions
                .push(i);
        }
        for (i, e) in collaborations.iter().enumerate() {
            index
                .entry(e.learner.clone())
                .or_default()
                .collaborations
                .push(i);
        }
        EventStore {
            observed,
            submissions,
            collaborations,
            calendar,
            index,
        }
    }

    pub fn calendar(&self) -> &CourseCalendar {
        &self.calendar
    }

    pub fn observed(&self) -> &[ObservedEvent] {
        &self.observed
    }

    pub fn submissions(&self) -> &[SubmissionEvent] {
        &self.submissions
    }

    pub fn collaborations(&self) -> &[CollaborationEvent] {
        &self.collaborations
    }

    /// Every learner appearing in any event table, sorted.
    pub fn learners(&self) -> impl ExactSizeIterator<Item = &LearnerId> {
        self.index.keys()
    }

    pub fn learner_set(&self) -> BTreeSet<&LearnerId> {
        self.index.keys().collect()
    }

    pub fn num_learners(&self) -> usize {
        self.index.len()
    }

    pub fn total_events(&self) -> usize {
        self.observed.len() + self.submissions.len() + self.collaborations.len()
    }

    /// Unknown learners yield three empty sequences.
    pub fn learners_sorted_events(&self, learner: &LearnerId) -> LearnerTimeline<'_> {
        match self.index.get(learner) {
            None => LearnerTimeline::default(),
            Some(ix) => LearnerTimeline {
                observed: ix.observed.iter().map(|&i| &self.observed[i]).collect(),
                submissions: ix
                    .submissions
                    .iter()
                    .map(|&i| &self.submissions[i])
                    .collect(),
                collaborations: ix
                    .collaborations
                    .iter()
                    .map(|&i| &self.collaborations[i])
                    .collect(),
            },
        }
    }

    /// Number of events (all modes) per week, plus the out-of-range count.
    pub fn week_histogram(&self) -> (Vec<usize>, usize) {
        let mut counts = vec![0usize; self.calendar.num_weeks as usize];
        let mut out_of_range = 0;
        let stamps = self
            .observed
            .iter()
            .map(|e| e.timestamp)
            .chain(self.submissions.iter().map(|e| e.timestamp))
            .chain(self.collaborations.iter().map(|e| e.timestamp));
        for t in stamps {
            match self.calendar.week_of(t) {
                Some(w) => counts[w as usize - 1] += 1,
                None => out_of_range += 1,
            }
        }
        (counts, out_of_range)
    }

    /// Writes the store directory. Output is a pure function of the store.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_lines(
            &dir.join(OBSERVED_FILE),
            self.observed.iter().map(crate::ingest::observed_to_json),
        )?;
        write_lines(
            &dir.join(SUBMISSIONS_FILE),
            self.submissions
                .iter()
                .map(crate::ingest::submission_to_json),
        )?;
        write_lines(
            &dir.join(COLLABORATIONS_FILE),
            self.collaborations
                .iter()
                .map(crate::ingest::collaboration_to_json),
        )?;
        self.calendar
            .write(&dir.join(CALENDAR_FILE), &dir.join(PROBLEMS_FILE))
    }

    /// Loads a store directory written by [`EventStore::write_dir`]. Any line
    /// that fails to parse is an error here, unlike raw ingestion.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let calendar = CourseCalendar::load(&dir.join(CALENDAR_FILE), &dir.join(PROBLEMS_FILE))?;
        let mut observed = Vec::new();
        let mut submissions = Vec::new();
        let mut collaborations = Vec::new();
        for name in [OBSERVED_FILE, SUBMISSIONS_FILE, COLLABORATIONS_FILE] {
            let path = dir.join(name);
            if !path.exists() {
                continue;
            }
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            for (i, line) in text.lines().enumerate() {
                let raw = crate::ingest::RawLogLine {
                    line_no: i as u64 + 1,
                    text: line.to_string(),
                };
                match crate::ingest::parse_log_line(&raw) {
                    Ok(crate::ingest::ParsedLine::Observed(e)) => observed.push(e),
                    Ok(crate::ingest::ParsedLine::Submission(e)) => submissions.push(e),
                    Ok(crate::ingest::ParsedLine::Collaboration(e)) => collaborations.push(e),
                    Ok(crate::ingest::ParsedLine::GradingEcho) => {}
                    Err(r) => {
                        return Err(Error::InvalidInput(format!(
                            "{}:{}: {}",
                            path.display(),
                            raw.line_no,
                            r
                        )))
                    }
                }
            }
        }
        Ok(EventStore::new(
            observed,
            submissions,
            collaborations,
            calendar,
        ))
    }
}

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<()> {
    let mut buf = String::new();
    for line in lines {
        buf.push_str(&line);
        buf.push('\n');
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}
