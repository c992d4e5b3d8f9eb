//! Domain records and enumerations for the annotation log.
//!
//! Everything here is a plain value. The canonical wire form of each record
//! is a flat JSON object: snake_case field names, enumerations as lowercase
//! hyphenated strings (open enumerations as `other:<label>`), timestamps as
//! RFC 3339 UTC strings at second precision. Unknown enumeration labels are
//! rejected at parse time.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationError, Violation};

/// Drops sub-second precision; the model stores and matches whole seconds.
pub fn truncate_to_second(dt: DateTime<Utc>) -> DateTime<Utc> {
    dt.with_nanosecond(0).expect("zero nanoseconds is valid")
}

/// Serde adapter pinning timestamps to RFC 3339 UTC at second precision.
pub mod ts_second {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(dt: &DateTime<Utc>, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&dt.to_rfc3339_opts(SecondsFormat::Secs, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(de)?;
        parse(&raw).map_err(de::Error::custom)
    }

    /// Shared by the serde adapter and by CLI/HTTP flag parsing.
    pub fn parse(raw: &str) -> Result<DateTime<Utc>, String> {
        DateTime::parse_from_rfc3339(raw)
            .map(|dt| super::truncate_to_second(dt.with_timezone(&Utc)))
            .map_err(|e| format!("malformed timestamp {raw:?}: {e}"))
    }
}

// ---------------------------------------------------------------------------
// Enumerations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AgeGroup {
    Under18,
    From18To25,
    From26To40,
    From41To60,
    Over60,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 5] = [
        AgeGroup::Under18,
        AgeGroup::From18To25,
        AgeGroup::From26To40,
        AgeGroup::From41To60,
        AgeGroup::Over60,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AgeGroup::Under18 => "under-18",
            AgeGroup::From18To25 => "18-25",
            AgeGroup::From26To40 => "26-40",
            AgeGroup::From41To60 => "41-60",
            AgeGroup::Over60 => "over-60",
        }
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgeGroup {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .find(|g| g.as_str() == s)
            .copied()
            .ok_or_else(|| format!("unknown age group {s:?}"))
    }
}

impl TryFrom<String> for AgeGroup {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<AgeGroup> for String {
    fn from(g: AgeGroup) -> String {
        g.as_str().to_string()
    }
}

/// Parses the label of an open enumerant: `other:<label>` with a nonempty
/// label. Bare `other` and `other:` are rejected.
fn parse_other_label(s: &str) -> Option<std::result::Result<String, String>> {
    if s == "other" || s == "other:" {
        return Some(Err("'other' requires a nonempty label, as in \"other:<label>\"".into()));
    }
    s.strip_prefix("other:").map(|label| Ok(label.to_string()))
}

macro_rules! open_enum_serde {
    ($ty:ident) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                match self.as_plain_str() {
                    Some(s) => f.write_str(s),
                    None => match self {
                        $ty::Other(label) => write!(f, "other:{label}"),
                        _ => unreachable!(),
                    },
                }
            }
        }

        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
                if let Some(parsed) = parse_other_label(s) {
                    return parsed.map($ty::Other).map_err(|e| format!("{}: {e}", $ty::NAME));
                }
                $ty::CLOSED
                    .iter()
                    .find(|v| v.as_plain_str() == Some(s))
                    .cloned()
                    .ok_or_else(|| format!("unknown {} {s:?}", $ty::NAME))
            }
        }

        impl TryFrom<String> for $ty {
            type Error = String;
            fn try_from(s: String) -> std::result::Result<Self, String> {
                s.parse()
            }
        }

        impl From<$ty> for String {
            fn from(v: $ty) -> String {
                v.to_string()
            }
        }
    };
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AreaOfActivity {
    Teaching,
    Research,
    Student,
    GeneralPublic,
    Other(String),
}

impl AreaOfActivity {
    const NAME: &'static str = "area of activity";
    pub const CLOSED: [AreaOfActivity; 4] = [
        AreaOfActivity::Teaching,
        AreaOfActivity::Research,
        AreaOfActivity::Student,
        AreaOfActivity::GeneralPublic,
    ];

    fn as_plain_str(&self) -> Option<&'static str> {
        match self {
            AreaOfActivity::Teaching => Some("teaching"),
            AreaOfActivity::Research => Some("research"),
            AreaOfActivity::Student => Some("student"),
            AreaOfActivity::GeneralPublic => Some("general-public"),
            AreaOfActivity::Other(_) => None,
        }
    }
}

open_enum_serde!(AreaOfActivity);

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DocumentFormat {
    Pdf,
    Word,
    Html,
    Text,
    Other(String),
}

impl DocumentFormat {
    const NAME: &'static str = "document format";
    pub const CLOSED: [DocumentFormat; 4] = [
        DocumentFormat::Pdf,
        DocumentFormat::Word,
        DocumentFormat::Html,
        DocumentFormat::Text,
    ];

    fn as_plain_str(&self) -> Option<&'static str> {
        match self {
            DocumentFormat::Pdf => Some("pdf"),
            DocumentFormat::Word => Some("word"),
            DocumentFormat::Html => Some("html"),
            DocumentFormat::Text => Some("text"),
            DocumentFormat::Other(_) => None,
        }
    }
}

open_enum_serde!(DocumentFormat);

/// Why the document was consulted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ConsultationReason {
    Leisure,
    KnowledgeAcquisition,
    Accidental,
    AcademicReading,
    ResearchReference,
    AnswerAQuestion,
    HistoricReference,
    InternetLink,
    Other(String),
}

impl ConsultationReason {
    const NAME: &'static str = "consultation reason";
    pub const CLOSED: [ConsultationReason; 8] = [
        ConsultationReason::Leisure,
        ConsultationReason::KnowledgeAcquisition,
        ConsultationReason::Accidental,
        ConsultationReason::AcademicReading,
        ConsultationReason::ResearchReference,
        ConsultationReason::AnswerAQuestion,
        ConsultationReason::HistoricReference,
        ConsultationReason::InternetLink,
    ];

    fn as_plain_str(&self) -> Option<&'static str> {
        match self {
            ConsultationReason::Leisure => Some("leisure"),
            ConsultationReason::KnowledgeAcquisition => Some("knowledge-acquisition"),
            ConsultationReason::Accidental => Some("accidental"),
            ConsultationReason::AcademicReading => Some("academic-reading"),
            ConsultationReason::ResearchReference => Some("research-reference"),
            ConsultationReason::AnswerAQuestion => Some("answer-a-question"),
            ConsultationReason::HistoricReference => Some("historic-reference"),
            ConsultationReason::InternetLink => Some("internet-link"),
            ConsultationReason::Other(_) => None,
        }
    }
}

open_enum_serde!(ConsultationReason);

macro_rules! closed_enum {
    ($ty:ident, $name:literal, { $($variant:ident => $str:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub enum $ty {
            $($variant),+
        }

        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $($ty::$variant => $str),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
                match s {
                    $($str => Ok($ty::$variant),)+
                    _ => Err(format!("unknown {} {s:?}", $name)),
                }
            }
        }

        impl TryFrom<String> for $ty {
            type Error = String;
            fn try_from(s: String) -> std::result::Result<Self, String> {
                s.parse()
            }
        }

        impl From<$ty> for String {
            fn from(v: $ty) -> String {
                v.as_str().to_string()
            }
        }
    };
}

closed_enum!(AnnotationType, "annotation type", {
    Marking => "marking",
    Typographic => "typographic",
    Reformatting => "reformatting",
    PassageNumbering => "passage-numbering",
    Text => "text",
    Icon => "icon",
    Symbol => "symbol",
});

closed_enum!(AnnotationLocation, "annotation location", {
    LeftMargin => "left-margin",
    RightMargin => "right-margin",
    Footer => "footer",
    Header => "header",
    Gutter => "gutter",
    OutsideDocument => "outside-document",
    EndOfDocument => "end-of-document",
});

closed_enum!(AnnotationObjective, "annotation objective", {
    Recapitulation => "recapitulation",
    Evaluation => "evaluation",
    Summary => "summary",
    RaiseAPoint => "raise-a-point",
    Classification => "classification",
    Structuring => "structuring",
    Differentiating => "differentiating",
    ForInformation => "for-information",
    AnswerToQuestion => "answer-to-question",
    Illustration => "illustration",
    ExtensionOfDocument => "extension-of-document",
    ClarifyAmbiguity => "clarify-ambiguity",
});

closed_enum!(Approach, "approach", {
    NewAnnotation => "new-annotation",
    FollowUp => "follow-up",
});

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

/// Registry entry for an annotator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub annotator_ref: String,
    pub first_name: String,
    pub last_name: String,
    pub email: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub postal_address: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    pub age_group: AgeGroup,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub social_class: Option<String>,
    pub area_of_activity: AreaOfActivity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorName {
    pub first_name: String,
    pub last_name: String,
}

/// Bibliographic entry for a trackable document. No content is stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_ref: String,
    pub title: String,
    /// Lowercased, deduplicated descriptors. [`DocumentRecord::normalize`]
    /// lowercases on the way into the store.
    pub keywords: BTreeSet<String>,
    pub authors: Vec<AuthorName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub publication_date: Option<NaiveDate>,
    pub format: DocumentFormat,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "abstract")]
    pub abstract_text: Option<String>,
}

impl DocumentRecord {
    /// Lowercases every keyword (the set dedups collisions).
    pub fn normalize(&mut self) {
        if self.keywords.iter().any(|k| k.chars().any(char::is_uppercase)) {
            self.keywords = self.keywords.iter().map(|k| k.to_lowercase()).collect();
        }
    }
}

/// One annotation left during a consultation. The body may be empty: a
/// consultation without comment still counts as a use of the document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub annotation_ref: String,
    pub a_type: AnnotationType,
    pub location: AnnotationLocation,
    pub objective: AnnotationObjective,
    pub body: String,
}

/// One timestamped use of one document by one user, with optional
/// annotation payload. The atomic record of the log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsultationEvent {
    pub event_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_ref: Option<String>,
    pub annotator_ref: String,
    pub doc_ref: String,
    #[serde(with = "ts_second")]
    pub session_start: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_seconds: Option<i64>,
    pub approach: Approach,
    pub reason: ConsultationReason,
    #[serde(default)]
    pub annotations: Vec<AnnotationRecord>,
}

impl ConsultationEvent {
    /// End of the lending interval, when the event carries a duration.
    /// Events without a duration occupy no interval.
    pub fn session_end(&self) -> Option<DateTime<Utc>> {
        let dur = self.duration_seconds?;
        self.session_start.checked_add_signed(chrono::Duration::seconds(dur))
    }
}

// ---------------------------------------------------------------------------
// Selectors
// ---------------------------------------------------------------------------

/// Constraint on the user or document axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefConstraint {
    Any,
    Fixed(String),
}

impl RefConstraint {
    pub fn fixed(r: impl Into<String>) -> Self {
        RefConstraint::Fixed(r.into())
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, RefConstraint::Fixed(_))
    }

    pub fn matches(&self, r: &str) -> bool {
        match self {
            RefConstraint::Any => true,
            RefConstraint::Fixed(want) => want == r,
        }
    }
}

/// Constraint on the time axis. A point matches events whose start equals
/// it exactly (second precision); coarser matching uses a half-open range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeConstraint {
    Any,
    At(DateTime<Utc>),
    Range {
        start: DateTime<Utc>,
        /// Exclusive.
        end: DateTime<Utc>,
    },
}

impl TimeConstraint {
    pub fn at(point: DateTime<Utc>) -> Self {
        TimeConstraint::At(truncate_to_second(point))
    }

    pub fn range(start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Self> {
        let constraint = TimeConstraint::Range {
            start: truncate_to_second(start),
            end: truncate_to_second(end),
        };
        constraint.validate()?;
        Ok(constraint)
    }

    pub fn validate(&self) -> Result<()> {
        if let TimeConstraint::Range { start, end } = self {
            if start >= end {
                return Err(Error::validation(
                    "time",
                    format!("range start {start} must precede end {end}"),
                ));
            }
        }
        Ok(())
    }

    pub fn is_fixed(&self) -> bool {
        !matches!(self, TimeConstraint::Any)
    }

    pub fn matches(&self, t: DateTime<Utc>) -> bool {
        match self {
            TimeConstraint::Any => true,
            TimeConstraint::At(point) => t == *point,
            TimeConstraint::Range { start, end } => *start <= t && t < *end,
        }
    }
}

/// Constraints over the user, document, and time axes. Every fixed/free
/// combination of the three axes is a legal selector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySelector {
    pub user: RefConstraint,
    pub doc: RefConstraint,
    pub time: TimeConstraint,
}

impl QuerySelector {
    /// All users, all documents, all time.
    pub fn all() -> Self {
        Self {
            user: RefConstraint::Any,
            doc: RefConstraint::Any,
            time: TimeConstraint::Any,
        }
    }

    pub fn new(user: RefConstraint, doc: RefConstraint, time: TimeConstraint) -> Self {
        Self { user, doc, time }
    }

    pub fn with_user(mut self, r: impl Into<String>) -> Self {
        self.user = RefConstraint::fixed(r);
        self
    }

    pub fn with_doc(mut self, r: impl Into<String>) -> Self {
        self.doc = RefConstraint::fixed(r);
        self
    }

    pub fn with_time(mut self, time: TimeConstraint) -> Self {
        self.time = time;
        self
    }

    /// Builds a selector from optional fixed references, for callers that
    /// only have strings (CLI flags, HTTP query parameters).
    pub fn from_parts(user: Option<String>, doc: Option<String>, time: TimeConstraint) -> Self {
        Self {
            user: user.map_or(RefConstraint::Any, RefConstraint::Fixed),
            doc: doc.map_or(RefConstraint::Any, RefConstraint::Fixed),
            time,
        }
    }

    pub fn matches(&self, event: &ConsultationEvent) -> bool {
        self.user.matches(&event.annotator_ref)
            && self.doc.matches(&event.doc_ref)
            && self.time.matches(event.session_start)
    }
}

impl Default for QuerySelector {
    fn default() -> Self {
        Self::all()
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Checks every [`UserRecord`] invariant; the error lists one violation per
/// offending field.
pub fn validate_user(record: &UserRecord) -> Result<()> {
    let mut violations = Vec::new();
    if record.annotator_ref.is_empty() {
        violations.push(Violation::new("annotator_ref", "must not be empty"));
    }
    if !record.email.contains('@') {
        violations.push(Violation::new("email", "must contain '@'"));
    }
    if let AreaOfActivity::Other(label) = &record.area_of_activity {
        if label.is_empty() {
            violations.push(Violation::new(
                "area_of_activity",
                "'other' requires a nonempty label",
            ));
        }
    }
    finish(violations)
}

/// Checks every [`DocumentRecord`] invariant.
pub fn validate_document(record: &DocumentRecord) -> Result<()> {
    let mut violations = Vec::new();
    if record.doc_ref.is_empty() {
        violations.push(Violation::new("doc_ref", "must not be empty"));
    }
    if record.title.is_empty() {
        violations.push(Violation::new("title", "must not be empty"));
    }
    if record.keywords.iter().any(|k| k.is_empty()) {
        violations.push(Violation::new("keywords", "must not contain empty strings"));
    }
    if let DocumentFormat::Other(label) = &record.format {
        if label.is_empty() {
            violations.push(Violation::new("format", "'other' requires a nonempty label"));
        }
    }
    finish(violations)
}

/// Referential integrity plus all structural [`ConsultationEvent`]
/// invariants. The follow-up ordering rule needs store history and is
/// checked at ingest, not here. Pure: identical inputs, identical outputs.
pub fn validate_event(
    event: &ConsultationEvent,
    user_exists: impl Fn(&str) -> bool,
    doc_exists: impl Fn(&str) -> bool,
) -> Result<()> {
    if !user_exists(&event.annotator_ref) {
        return Err(Error::UnknownUser(event.annotator_ref.clone()));
    }
    if !doc_exists(&event.doc_ref) {
        return Err(Error::UnknownDocument(event.doc_ref.clone()));
    }

    let mut violations = Vec::new();
    if event.event_ref.is_empty() {
        violations.push(Violation::new("event_ref", "must not be empty"));
    }
    if let Some(dur) = event.duration_seconds {
        if dur < 0 {
            violations.push(Violation::new("duration_seconds", "must be nonnegative"));
        } else if event.session_end().is_none() {
            violations.push(Violation::new("duration_seconds", "out of range"));
        }
    }
    if let ConsultationReason::Other(label) = &event.reason {
        if label.is_empty() {
            violations.push(Violation::new("reason", "'other' requires a nonempty label"));
        }
    }
    let mut seen = BTreeSet::new();
    for annotation in &event.annotations {
        if annotation.annotation_ref.is_empty() {
            violations.push(Violation::new("annotations", "annotation_ref must not be empty"));
        } else if !seen.insert(annotation.annotation_ref.as_str()) {
            violations.push(Violation::new(
                "annotations",
                format!(
                    "annotation_ref {:?} duplicated within the event",
                    annotation.annotation_ref
                ),
            ));
        }
    }
    finish(violations)
}

fn finish(violations: Vec<Violation>) -> Result<()> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(ValidationError::new(violations)))
    }
}
