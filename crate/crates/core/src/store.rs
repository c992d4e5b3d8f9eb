//! Append-only JSON-Lines event log with in-memory secondary indexes.
//!
//! One record per line, `{"kind": "user"|"document"|"event", "body": ...}`.
//! The file is the source of truth; indexes (by user, by document, by time)
//! are rebuilt from it on open and answer any [`QuerySelector`]. Writes go
//! disk-first, so readers never observe an event the log does not hold.
//!
//! Single-writer, multi-reader: mutation takes `&mut self`, reads take
//! `&self`; services wanting concurrent access wrap the store in a lock.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    validate_document, validate_event, validate_user, Approach, ConsultationEvent,
    DocumentRecord, QuerySelector, TimeConstraint, UserRecord,
};

/// One line of the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body", rename_all = "lowercase")]
pub enum LogRecord {
    User(UserRecord),
    Document(DocumentRecord),
    Event(ConsultationEvent),
}

// ---------------------------------------------------------------------------
// Selector shapes
// ---------------------------------------------------------------------------

/// Which of the user/document/time axes a selector pins down. The eight
/// subsets map bijectively onto the eight tracking projections; the free
/// axes are the ones enumerated over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShapeCode {
    pub user_fixed: bool,
    pub doc_fixed: bool,
    pub time_fixed: bool,
}

impl ShapeCode {
    pub const ALL: [ShapeCode; 8] = [
        ShapeCode::from_fixed(false, false, false),
        ShapeCode::from_fixed(false, false, true),
        ShapeCode::from_fixed(false, true, false),
        ShapeCode::from_fixed(false, true, true),
        ShapeCode::from_fixed(true, false, false),
        ShapeCode::from_fixed(true, false, true),
        ShapeCode::from_fixed(true, true, false),
        ShapeCode::from_fixed(true, true, true),
    ];

    pub const fn from_fixed(user_fixed: bool, doc_fixed: bool, time_fixed: bool) -> Self {
        Self {
            user_fixed,
            doc_fixed,
            time_fixed,
        }
    }

    /// Representation string: fixed axes outside the braces, free axes as
    /// differentials inside them.
    pub fn code(&self) -> &'static str {
        match (self.user_fixed, self.doc_fixed, self.time_fixed) {
            (false, false, false) => "{dUdDdT}",
            (false, false, true) => "T{dUdD}",
            (false, true, false) => "D{dUdT}",
            (false, true, true) => "DT{dU}",
            (true, false, false) => "U{dDdT}",
            (true, false, true) => "UT{dD}",
            (true, true, false) => "UD{dT}",
            (true, true, true) => "UDT",
        }
    }
}

impl fmt::Display for ShapeCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Maps a selector onto its tracking-projection shape. Both point and range
/// constraints count as fixing the time axis.
pub fn classify_selector(selector: &QuerySelector) -> ShapeCode {
    ShapeCode::from_fixed(
        selector.user.is_fixed(),
        selector.doc.is_fixed(),
        selector.time.is_fixed(),
    )
}

// ---------------------------------------------------------------------------
// Stats
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSpan {
    #[serde(with = "crate::model::ts_second")]
    pub min: DateTime<Utc>,
    #[serde(with = "crate::model::ts_second")]
    pub max: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreStats {
    pub n_users: u64,
    pub n_docs: u64,
    pub n_events: u64,
    pub n_annotations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_span: Option<TimeSpan>,
}

// ---------------------------------------------------------------------------
// Store
// ---------------------------------------------------------------------------

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Store")
            .field("path", &self.path)
            .field("n_users", &self.users.len())
            .field("n_docs", &self.docs.len())
            .field("n_events", &self.events.len())
            .finish_non_exhaustive()
    }
}

pub struct Store {
    path: PathBuf,
    /// Opened lazily on first append, so read-only use never creates a file.
    writer: Option<BufWriter<File>>,
    users: HashMap<String, UserRecord>,
    docs: HashMap<String, DocumentRecord>,
    /// Raw log order; positions here are what the indexes point at.
    events: Vec<ConsultationEvent>,
    by_user: HashMap<String, Vec<usize>>,
    by_doc: HashMap<String, Vec<usize>>,
    by_time: BTreeMap<DateTime<Utc>, Vec<usize>>,
    event_positions: HashMap<String, usize>,
    n_annotations: u64,
    warnings: Vec<String>,
}

impl Store {
    /// Opens the log at `path`, rebuilding indexes from its records. A
    /// missing file is a fresh store. A malformed line mid-file is a
    /// corrupt-log error; a malformed final line is taken as a partially
    /// written append, truncated away with a warning.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut store = Store {
            path,
            writer: None,
            users: HashMap::new(),
            docs: HashMap::new(),
            events: Vec::new(),
            by_user: HashMap::new(),
            by_doc: HashMap::new(),
            by_time: BTreeMap::new(),
            event_positions: HashMap::new(),
            n_annotations: 0,
            warnings: Vec::new(),
        };

        let bytes = match std::fs::read(&store.path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(store),
            Err(e) => return Err(e.into()),
        };

        let mut offset = 0usize;
        let mut line_no = 0usize;
        let mut valid_len = 0usize;
        let mut terminated = true;
        let mut segments = bytes.split_inclusive(|&b| b == b'\n').peekable();
        while let Some(segment) = segments.next() {
            line_no += 1;
            let is_last = segments.peek().is_none();
            let has_newline = segment.ends_with(b"\n");
            let line = if has_newline {
                &segment[..segment.len() - 1]
            } else {
                segment
            };
            match serde_json::from_slice::<LogRecord>(line) {
                Ok(record) => {
                    store.apply(record);
                    valid_len = offset + segment.len();
                    terminated = has_newline;
                }
                Err(e) if is_last => {
                    store.warnings.push(format!(
                        "discarded partial trailing line {line_no} ({e}); earlier records preserved"
                    ));
                    break;
                }
                Err(e) => {
                    return Err(Error::CorruptLog {
                        line: line_no,
                        message: e.to_string(),
                    });
                }
            }
            offset += segment.len();
        }

        if valid_len < bytes.len() {
            let file = OpenOptions::new().write(true).open(&store.path)?;
            file.set_len(valid_len as u64)?;
            file.sync_all()?;
        } else if !terminated {
            // Last line parsed but lacks its newline; terminate it so the
            // next append starts on a fresh line.
            let mut file = OpenOptions::new().append(true).open(&store.path)?;
            file.write_all(b"\n")?;
            file.sync_all()?;
        }

        Ok(store)
    }

    fn apply(&mut self, record: LogRecord) {
        match record {
            LogRecord::User(user) => {
                self.users.insert(user.annotator_ref.clone(), user);
            }
            LogRecord::Document(doc) => {
                self.docs.insert(doc.doc_ref.clone(), doc);
            }
            LogRecord::Event(event) => self.index_event(event),
        }
    }

    fn index_event(&mut self, event: ConsultationEvent) {
        let position = self.events.len();
        self.by_user
            .entry(event.annotator_ref.clone())
            .or_default()
            .push(position);
        self.by_doc
            .entry(event.doc_ref.clone())
            .or_default()
            .push(position);
        self.by_time
            .entry(event.session_start)
            .or_default()
            .push(position);
        self.event_positions.insert(event.event_ref.clone(), position);
        self.n_annotations += event.annotations.len() as u64;
        self.events.push(event);
    }

    fn append(&mut self, record: &LogRecord) -> Result<()> {
        if self.writer.is_none() {
            let file = OpenOptions::new()
                .append(true)
                .create(true)
                .open(&self.path)?;
            self.writer = Some(BufWriter::new(file));
        }
        let writer = self.writer.as_mut().expect("writer just opened");
        serde_json::to_writer(&mut *writer, record)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e))?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        Ok(())
    }

    /// Registers an annotator. Byte-identical re-registration is a no-op;
    /// the same reference with different content is rejected.
    pub fn register_user(&mut self, record: UserRecord) -> Result<()> {
        validate_user(&record)?;
        if let Some(existing) = self.users.get(&record.annotator_ref) {
            if *existing == record {
                return Ok(());
            }
            return Err(Error::Duplicate {
                kind: "user",
                reference: record.annotator_ref,
            });
        }
        self.append(&LogRecord::User(record.clone()))?;
        self.users.insert(record.annotator_ref.clone(), record);
        Ok(())
    }

    /// Registers a document. Keywords are lowercased on the way in.
    pub fn register_document(&mut self, mut record: DocumentRecord) -> Result<()> {
        record.normalize();
        validate_document(&record)?;
        if let Some(existing) = self.docs.get(&record.doc_ref) {
            if *existing == record {
                return Ok(());
            }
            return Err(Error::Duplicate {
                kind: "document",
                reference: record.doc_ref,
            });
        }
        self.append(&LogRecord::Document(record.clone()))?;
        self.docs.insert(record.doc_ref.clone(), record);
        Ok(())
    }

    /// Appends a consultation event. The log entry is durable before any
    /// index reflects it; all three indexes are updated together.
    ///
    /// With `strict_lending`, an event carrying a duration is rejected when
    /// its interval intersects a stored interval on the same document held
    /// by a different user.
    pub fn ingest_event(&mut self, event: ConsultationEvent, strict_lending: bool) -> Result<()> {
        validate_event(
            &event,
            |u| self.users.contains_key(u),
            |d| self.docs.contains_key(d),
        )?;

        if let Some(&position) = self.event_positions.get(&event.event_ref) {
            if self.events[position] == event {
                return Ok(());
            }
            return Err(Error::Duplicate {
                kind: "event",
                reference: event.event_ref,
            });
        }

        if event.approach == Approach::FollowUp {
            let has_prior = self
                .positions_for_user(&event.annotator_ref)
                .iter()
                .map(|&p| &self.events[p])
                .any(|prior| {
                    prior.doc_ref == event.doc_ref && prior.session_start < event.session_start
                });
            if !has_prior {
                return Err(Error::validation(
                    "approach",
                    "follow-up requires a prior consultation of the same document by the same user",
                ));
            }
        }

        if strict_lending {
            if let Some(end) = event.session_end() {
                for &position in self.positions_for_doc(&event.doc_ref) {
                    let held = &self.events[position];
                    if held.annotator_ref == event.annotator_ref {
                        continue;
                    }
                    let Some(held_end) = held.session_end() else {
                        continue;
                    };
                    let latest_start = event.session_start.max(held.session_start);
                    let earliest_end = end.min(held_end);
                    if latest_start < earliest_end {
                        return Err(Error::LendingOverlap {
                            doc_ref: event.doc_ref,
                            conflicting_event_ref: held.event_ref.clone(),
                        });
                    }
                }
            }
        }

        self.append(&LogRecord::Event(event.clone()))?;
        self.index_event(event);
        Ok(())
    }

    fn positions_for_user(&self, user: &str) -> &[usize] {
        self.by_user.get(user).map_or(&[], Vec::as_slice)
    }

    fn positions_for_doc(&self, doc: &str) -> &[usize] {
        self.by_doc.get(doc).map_or(&[], Vec::as_slice)
    }

    /// Events matching every present constraint, ordered by
    /// `(session_start, event_ref)` ascending. Fixing a reference that was
    /// never registered is an error, distinguishing "no events" from "no
    /// such entity".
    pub fn query(&self, selector: &QuerySelector) -> Result<Vec<&ConsultationEvent>> {
        selector.time.validate()?;
        if let crate::model::RefConstraint::Fixed(user) = &selector.user {
            if !self.users.contains_key(user) {
                return Err(Error::UnknownUser(user.clone()));
            }
        }
        if let crate::model::RefConstraint::Fixed(doc) = &selector.doc {
            if !self.docs.contains_key(doc) {
                return Err(Error::UnknownDocument(doc.clone()));
            }
        }

        // Walk the narrowest applicable index, then apply the full
        // predicate; the final sort fixes the ordering contract.
        let mut matched: Vec<&ConsultationEvent> = match (&selector.user, &selector.doc) {
            (crate::model::RefConstraint::Fixed(user), _) => self
                .positions_for_user(user)
                .iter()
                .map(|&p| &self.events[p])
                .filter(|e| selector.matches(e))
                .collect(),
            (_, crate::model::RefConstraint::Fixed(doc)) => self
                .positions_for_doc(doc)
                .iter()
                .map(|&p| &self.events[p])
                .filter(|e| selector.matches(e))
                .collect(),
            _ => match &selector.time {
                TimeConstraint::Any => self.events.iter().collect(),
                TimeConstraint::At(point) => self
                    .by_time
                    .get(point)
                    .into_iter()
                    .flatten()
                    .map(|&p| &self.events[p])
                    .collect(),
                TimeConstraint::Range { start, end } => self
                    .by_time
                    .range(*start..*end)
                    .flat_map(|(_, positions)| positions)
                    .map(|&p| &self.events[p])
                    .collect(),
            },
        };
        matched.sort_by(|a, b| {
            a.session_start
                .cmp(&b.session_start)
                .then_with(|| a.event_ref.cmp(&b.event_ref))
        });
        Ok(matched)
    }

    pub fn stats(&self) -> StoreStats {
        let time_span = match (self.by_time.keys().next(), self.by_time.keys().next_back()) {
            (Some(&min), Some(&max)) => Some(TimeSpan { min, max }),
            _ => None,
        };
        StoreStats {
            n_users: self.users.len() as u64,
            n_docs: self.docs.len() as u64,
            n_events: self.events.len() as u64,
            n_annotations: self.n_annotations,
            time_span,
        }
    }

    pub fn user(&self, annotator_ref: &str) -> Option<&UserRecord> {
        self.users.get(annotator_ref)
    }

    pub fn document(&self, doc_ref: &str) -> Option<&DocumentRecord> {
        self.docs.get(doc_ref)
    }

    pub fn users(&self) -> impl Iterator<Item = &UserRecord> {
        self.users.values()
    }

    pub fn documents(&self) -> impl Iterator<Item = &DocumentRecord> {
        self.docs.values()
    }

    /// The full event log in append order.
    pub fn events(&self) -> &[ConsultationEvent] {
        &self.events
    }

    /// Recovery notes from [`Store::open`], e.g. a truncated partial line.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Flushes and syncs the log to disk, then drops the handle.
    pub fn close(mut self) -> Result<()> {
        if let Some(mut writer) = self.writer.take() {
            writer.flush()?;
            writer.get_ref().sync_all()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_codes_are_a_bijection() {
        let mut seen = std::collections::BTreeSet::new();
        for shape in ShapeCode::ALL {
            assert!(seen.insert(shape.code()), "code {} repeated", shape.code());
        }
        assert_eq!(seen.len(), 8);
    }

    #[test]
    fn classify_matches_projection_table() {
        let t = crate::model::ts_second::parse("2024-01-01T00:00:00Z").unwrap();
        let cases = [
            (QuerySelector::all(), "{dUdDdT}"),
            (QuerySelector::all().with_time(TimeConstraint::at(t)), "T{dUdD}"),
            (QuerySelector::all().with_doc("d1"), "D{dUdT}"),
            (
                QuerySelector::all().with_doc("d1").with_time(TimeConstraint::at(t)),
                "DT{dU}",
            ),
            (QuerySelector::all().with_user("u1"), "U{dDdT}"),
            (
                QuerySelector::all().with_user("u1").with_time(TimeConstraint::at(t)),
                "UT{dD}",
            ),
            (QuerySelector::all().with_user("u1").with_doc("d1"), "UD{dT}"),
            (
                QuerySelector::all()
                    .with_user("u1")
                    .with_doc("d1")
                    .with_time(TimeConstraint::at(t)),
                "UDT",
            ),
        ];
        for (selector, expected) in cases {
            assert_eq!(classify_selector(&selector).code(), expected);
        }
    }

    #[test]
    fn range_counts_as_fixed_time() {
        let t0 = crate::model::ts_second::parse("2024-01-01T00:00:00Z").unwrap();
        let t1 = crate::model::ts_second::parse("2024-02-01T00:00:00Z").unwrap();
        let selector =
            QuerySelector::all().with_time(TimeConstraint::range(t0, t1).unwrap());
        assert_eq!(classify_selector(&selector).code(), "T{dUdD}");
    }
}
