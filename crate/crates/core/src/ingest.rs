//! Raw NDJSON log parsing and curation.
//!
//! Every line is one JSON object. Required keys on all lines:
//!
//! | key          | type   | notes                                   |
//! |--------------|--------|-----------------------------------------|
//! | `learner_id` | string | non-empty                               |
//! | `event_type` | string | see vocabulary below                    |
//! | `timestamp`  | string | RFC-3339; fractional seconds truncated  |
//!
//! Observed (browsing) events, `event_type` one of [`OBSERVED_EVENT_TYPES`], add
//! `resource_id` (string or integer) and `resource_kind`
//! (`lecture|book|wiki|forum|problem|other`).
//!
//! Submissions, `problem_check` or `problem_save`, add `problem_id` and
//! `correct` (bool, required for checks). A `"save": true` flag also marks a save.
//!
//! Collaborations, `forum_post|forum_reply|wiki_edit` (or `collaboration` with a
//! `collab_kind` key), take an optional `body` whose length in Unicode scalar
//! values becomes `content_chars`; without a body an explicit integer
//! `content_chars` is accepted, else 0.
//!
//! `problem_graded` lines are grading echoes of an earlier check and are not
//! loaded. Anything else is rejected with a machine-readable reason.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::model::{
    CollabKind, CollaborationEvent, CourseCalendar, EventStore, LearnerId, ObservedEvent,
    ResourceKind, SubmissionEvent, SubmissionKind, Timestamp, PROBLEMS_FILE,
};

pub const OBSERVED_EVENT_TYPES: &[&str] = &[
    "play_video",
    "pause_video",
    "seek_video",
    "load_video",
    "stop_video",
    "speed_change_video",
    "show_transcript",
    "hide_transcript",
    "seq_goto",
    "seq_next",
    "seq_prev",
    "page_view",
    "page_close",
    "book",
    "problem_show",
    "forum_view",
    "wiki_view",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawLogLine {
    pub line_no: u64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedLine {
    Observed(ObservedEvent),
    Submission(SubmissionEvent),
    Collaboration(CollaborationEvent),
    /// `problem_graded`: recognised, intentionally not loaded.
    GradingEcho,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    BlankLine,
    InvalidJson,
    MissingField(&'static str),
    BadTimestamp,
    UnknownEventType(String),
    InvalidField(&'static str),
}

impl RejectReason {
    /// Stable key used in `rejects_by_reason`.
    pub fn key(&self) -> &'static str {
        match self {
            RejectReason::BlankLine => "blank_line",
            RejectReason::InvalidJson => "invalid_json",
            RejectReason::MissingField(_) => "missing_field",
            RejectReason::BadTimestamp => "bad_timestamp",
            RejectReason::UnknownEventType(_) => "unknown_event_type",
            RejectReason::InvalidField(_) => "invalid_field",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::MissingField(k) => write!(f, "missing field `{k}`"),
            RejectReason::InvalidField(k) => write!(f, "invalid value for `{k}`"),
            RejectReason::UnknownEventType(t) => write!(f, "unknown event_type {t:?}"),
            other => f.write_str(other.key()),
        }
    }
}

pub const GRADING_ECHO_KEY: &str = "grading_echo";

pub fn parse_log_line(raw: &RawLogLine) -> Result<ParsedLine, RejectReason> {
    if raw.text.trim().is_empty() {
        return Err(RejectReason::BlankLine);
    }
    let value: Value = serde_json::from_str(&raw.text).map_err(|_| RejectReason::InvalidJson)?;
    let obj = value.as_object().ok_or(RejectReason::InvalidJson)?;

    let learner = required_str(obj, "learner_id")?;
    let learner = LearnerId::new(learner).map_err(|_| RejectReason::InvalidField("learner_id"))?;
    let event_type = required_str(obj, "event_type")?;
    let timestamp = match obj.get("timestamp") {
        None | Some(Value::Null) => return Err(RejectReason::MissingField("timestamp")),
        Some(Value::String(s)) => {
            Timestamp::parse_rfc3339(s).map_err(|_| RejectReason::BadTimestamp)?
        }
        Some(_) => return Err(RejectReason::BadTimestamp),
    };

    match event_type {
        "problem_graded" => Ok(ParsedLine::GradingEcho),
        "problem_check" | "problem_save" => {
            let problem_id = id_field(obj, "problem_id")?;
            let save_flag = match obj.get("save") {
                None | Some(Value::Null) => false,
                Some(Value::Bool(b)) => *b,
                Some(_) => return Err(RejectReason::InvalidField("save")),
            };
            let kind = if event_type == "problem_save" || save_flag {
                SubmissionKind::Save
            } else {
                SubmissionKind::Check
            };
            let is_correct = match (obj.get("correct"), kind) {
                (Some(Value::Bool(b)), _) => *b,
                (None | Some(Value::Null), SubmissionKind::Save) => false,
                (None | Some(Value::Null), SubmissionKind::Check) => {
                    return Err(RejectReason::MissingField("correct"))
                }
                (Some(_), _) => return Err(RejectReason::InvalidField("correct")),
            };
            Ok(ParsedLine::Submission(SubmissionEvent {
                learner,
                problem_id,
                timestamp,
                is_correct,
                kind,
            }))
        }
        "forum_post" | "forum_reply" | "wiki_edit" | "collaboration" => {
            let declared = match obj.get("collab_kind") {
                None | Some(Value::Null) => None,
                Some(Value::String(s)) => Some(
                    s.parse::<CollabKind>()
                        .map_err(|_| RejectReason::InvalidField("collab_kind"))?,
                ),
                Some(_) => return Err(RejectReason::InvalidField("collab_kind")),
            };
            let kind = match (event_type, declared) {
                ("collaboration", None) => return Err(RejectReason::MissingField("collab_kind")),
                ("collaboration", Some(k)) => k,
                (t, d) => {
                    let k: CollabKind = t.parse().expect("matched collaboration event type");
                    if d.is_some_and(|d| d != k) {
                        return Err(RejectReason::InvalidField("collab_kind"));
                    }
                    k
                }
            };
            let content_chars = match (obj.get("body"), obj.get("content_chars")) {
                (Some(Value::String(body)), _) => body.chars().count() as u64,
                (Some(Value::Null) | None, Some(Value::Number(n))) => n
                    .as_u64()
                    .ok_or(RejectReason::InvalidField("content_chars"))?,
                (Some(Value::Null) | None, None | Some(Value::Null)) => 0,
                (Some(_), _) => return Err(RejectReason::InvalidField("body")),
                (_, Some(_)) => return Err(RejectReason::InvalidField("content_chars")),
            };
            Ok(ParsedLine::Collaboration(CollaborationEvent {
                learner,
                timestamp,
                kind,
                content_chars,
            }))
        }
        t if OBSERVED_EVENT_TYPES.contains(&t) => {
            let resource_id = id_field(obj, "resource_id")?;
            let kind = match obj.get("resource_kind") {
                None | Some(Value::Null) => {
                    return Err(RejectReason::MissingField("resource_kind"))
                }
                Some(Value::String(s)) => s
                    .parse::<ResourceKind>()
                    .map_err(|_| RejectReason::InvalidField("resource_kind"))?,
                Some(_) => return Err(RejectReason::InvalidField("resource_kind")),
            };
            Ok(ParsedLine::Observed(ObservedEvent {
                learner,
                action: t.to_string(),
                resource_id,
                kind,
                timestamp,
                duration_s: None,
            }))
        }
        other => Err(RejectReason::UnknownEventType(other.to_string())),
    }
}

fn required_str<'a>(
    obj: &'a Map<String, Value>,
    key: &'static str,
) -> Result<&'a str, RejectReason> {
    match obj.get(key) {
        None | Some(Value::Null) => Err(RejectReason::MissingField(key)),
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(RejectReason::InvalidField(key)),
    }
}

/// Identifier keys accept strings or integers (Fig-style numeric urls).
fn id_field(obj: &Map<String, Value>, key: &'static str) -> Result<String, RejectReason> {
    match obj.get(key) {
        None | Some(Value::Null) => Err(RejectReason::MissingField(key)),
        Some(Value::String(s)) if !s.is_empty() => Ok(s.clone()),
        Some(Value::Number(n)) if n.is_u64() || n.is_i64() => Ok(n.to_string()),
        Some(_) => Err(RejectReason::InvalidField(key)),
    }
}

pub fn observed_to_json(e: &ObservedEvent) -> String {
    json!({
        "learner_id": e.learner.as_str(),
        "event_type": e.action,
        "resource_id": e.resource_id,
        "resource_kind": e.kind.as_str(),
        "timestamp": e.timestamp.to_rfc3339(),
    })
    .to_string()
}

pub fn submission_to_json(e: &SubmissionEvent) -> String {
    let event_type = match e.kind {
        SubmissionKind::Check => "problem_check",
        SubmissionKind::Save => "problem_save",
    };
    json!({
        "learner_id": e.learner.as_str(),
        "event_type": event_type,
        "problem_id": e.problem_id,
        "correct": e.is_correct,
        "timestamp": e.timestamp.to_rfc3339(),
    })
    .to_string()
}

pub fn collaboration_to_json(e: &CollaborationEvent) -> String {
    json!({
        "learner_id": e.learner.as_str(),
        "event_type": e.kind.as_str(),
        "content_chars": e.content_chars,
        "timestamp": e.timestamp.to_rfc3339(),
    })
    .to_string()
}

/// Line accounting for one ingestion run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CurationReport {
    pub total: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub rejects_by_reason: BTreeMap<String, u64>,
    /// Accepted events outside the course weeks; stored but excluded from features.
    pub out_of_range: u64,
    /// Accepted submissions whose problem_id is not in the problem table.
    pub unknown_problem: u64,
    pub files: Vec<String>,
}

impl CurationReport {
    fn reject(&mut self, key: &str) {
        self.rejected += 1;
        *self.rejects_by_reason.entry(key.to_string()).or_default() += 1;
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// NDJSON inputs in `dir`: `*.ndjson` and `*.jsonl`, sorted by file name.
pub fn event_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_log = matches!(
            path.extension().and_then(|x| x.to_str()),
            Some("ndjson" | "jsonl")
        );
        if is_log && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Parses every log file under `events_dir` against the calendar at
/// `calendar_path`. The problem table is read from `problems.csv` beside the
/// calendar when present.
pub fn ingest_directory(
    events_dir: &Path,
    calendar_path: &Path,
) -> Result<(EventStore, CurationReport)> {
    let problems_path = calendar_path
        .parent()
        .unwrap_or(Path::new("."))
        .join(PROBLEMS_FILE);
    let calendar = CourseCalendar::load(calendar_path, &problems_path)?;
    let files = event_files(events_dir)?;

    let texts = files
        .iter()
        .map(|p| std::fs::read_to_string(p).map_err(|e| Error::io(p, e)))
        .collect::<Result<Vec<_>>>()?;
    let parsed: Vec<Vec<Result<ParsedLine, RejectReason>>> = texts
        .par_iter()
        .map(|text| {
            text.lines()
                .enumerate()
                .map(|(i, line)| {
                    parse_log_line(&RawLogLine {
                        line_no: i as u64 + 1,
                        text: line.to_string(),
                    })
                })
                .collect()
        })
        .collect();

    let mut report = CurationReport {
        files: files
            .iter()
            .map(|p| {
                p.file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default()
            })
            .collect(),
        ..Default::default()
    };
    let mut observed = Vec::new();
    let mut submissions = Vec::new();
    let mut collaborations = Vec::new();
    // File order then line order; EventStore::new stable-sorts by timestamp on top.
    for results in parsed {
        for result in results {
            report.total += 1;
            match result {
                Ok(ParsedLine::GradingEcho) => report.reject(GRADING_ECHO_KEY),
                Ok(ParsedLine::Observed(e)) => {
                    report.accepted += 1;
                    observed.push(e);
                }
                Ok(ParsedLine::Submission(e)) => {
                    report.accepted += 1;
                    if calendar.problem(&e.problem_id).is_none() {
                        report.unknown_problem += 1;
                    }
                    submissions.push(e);
                }
                Ok(ParsedLine::Collaboration(e)) => {
                    report.accepted += 1;
                    collaborations.push(e);
                }
                Err(reason) => report.reject(reason.key()),
            }
        }
    }
    let store = EventStore::new(observed, submissions, collaborations, calendar);
    report.out_of_range = store.week_histogram().1 as u64;
    Ok((store, report))
}
