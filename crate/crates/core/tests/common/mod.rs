//! Shared fixtures and independent oracles for the integration tests.
//!
//! The oracles re-implement matching, tallying, and scoring directly over
//! the raw data, on purpose: they share no predicate or aggregation code
//! with the paths under test.

#![allow(dead_code)]

use chrono::{DateTime, Utc};
use rand::Rng;

use amiedot_core::model::{
    ts_second, AgeGroup, AnnotationLocation, AnnotationObjective, AnnotationRecord,
    AnnotationType, Approach, AreaOfActivity, AuthorName, ConsultationEvent, ConsultationReason,
    DocumentFormat, DocumentRecord, QuerySelector, RefConstraint, TimeConstraint, UserRecord,
};
use amiedot_core::store::Store;

pub fn ts(raw: &str) -> DateTime<Utc> {
    ts_second::parse(raw).unwrap()
}

pub fn user(annotator_ref: &str) -> UserRecord {
    UserRecord {
        annotator_ref: annotator_ref.to_string(),
        first_name: "Ada".into(),
        last_name: "Arnaud".into(),
        email: format!("{annotator_ref}@example.org"),
        postal_address: None,
        region: None,
        age_group: AgeGroup::From26To40,
        country: None,
        social_class: None,
        area_of_activity: AreaOfActivity::Research,
    }
}

pub fn doc(doc_ref: &str, keywords: &[&str]) -> DocumentRecord {
    DocumentRecord {
        doc_ref: doc_ref.to_string(),
        title: format!("Title of {doc_ref}"),
        keywords: keywords.iter().map(|k| k.to_string()).collect(),
        authors: vec![AuthorName {
            first_name: "Ada".into(),
            last_name: "Arnaud".into(),
        }],
        publication_date: None,
        format: DocumentFormat::Pdf,
        abstract_text: None,
    }
}

pub fn event(event_ref: &str, user: &str, doc: &str, at: &str) -> ConsultationEvent {
    ConsultationEvent {
        event_ref: event_ref.to_string(),
        context_ref: None,
        annotator_ref: user.to_string(),
        doc_ref: doc.to_string(),
        session_start: ts(at),
        duration_seconds: None,
        approach: Approach::NewAnnotation,
        reason: ConsultationReason::AcademicReading,
        annotations: vec![],
    }
}

pub fn annotation(
    annotation_ref: &str,
    objective: AnnotationObjective,
    body: &str,
) -> AnnotationRecord {
    AnnotationRecord {
        annotation_ref: annotation_ref.to_string(),
        a_type: AnnotationType::Text,
        location: AnnotationLocation::LeftMargin,
        objective,
        body: body.to_string(),
    }
}

/// Store in a fresh temp dir with the given records already in.
pub fn store_with(
    dir: &tempfile::TempDir,
    users: &[UserRecord],
    docs: &[DocumentRecord],
    events: &[ConsultationEvent],
) -> Store {
    let mut store = Store::open(dir.path().join("log.jsonl")).unwrap();
    for u in users {
        store.register_user(u.clone()).unwrap();
    }
    for d in docs {
        store.register_document(d.clone()).unwrap();
    }
    for e in events {
        store.ingest_event(e.clone(), false).unwrap();
    }
    store
}

// ---------------------------------------------------------------------------
// Query oracle
// ---------------------------------------------------------------------------

/// Independent linear scan of the raw log: its own predicate, its own
/// ordering rule.
pub fn scan_query<'a>(
    events: &'a [ConsultationEvent],
    selector: &QuerySelector,
) -> Vec<&'a ConsultationEvent> {
    let mut hits: Vec<&ConsultationEvent> = events
        .iter()
        .filter(|e| {
            let user_ok = match &selector.user {
                RefConstraint::Any => true,
                RefConstraint::Fixed(u) => *u == e.annotator_ref,
            };
            let doc_ok = match &selector.doc {
                RefConstraint::Any => true,
                RefConstraint::Fixed(d) => *d == e.doc_ref,
            };
            let time_ok = match &selector.time {
                TimeConstraint::Any => true,
                TimeConstraint::At(p) => e.session_start == *p,
                TimeConstraint::Range { start, end } => {
                    e.session_start >= *start && e.session_start < *end
                }
            };
            user_ok && doc_ok && time_ok
        })
        .collect();
    hits.sort_by(|a, b| {
        (a.session_start, &a.event_ref).cmp(&(b.session_start, &b.event_ref))
    });
    hits
}

pub fn refs(events: &[&ConsultationEvent]) -> Vec<String> {
    events.iter().map(|e| e.event_ref.clone()).collect()
}

// ---------------------------------------------------------------------------
// Random logs and selectors
// ---------------------------------------------------------------------------

pub struct RandomLog {
    pub users: Vec<UserRecord>,
    pub docs: Vec<DocumentRecord>,
    pub events: Vec<ConsultationEvent>,
}

const BODY_WORDS: [&str; 8] = [
    "survey", "methods", "sources", "argument", "tables", "evidence", "passage", "chapter",
];

/// A random but always-valid log: every reference registered, approaches
/// all new, timestamps inside one day of 2024-03-01.
pub fn random_log(
    rng: &mut impl Rng,
    n_users: usize,
    n_docs: usize,
    n_events: usize,
) -> RandomLog {
    let base = ts("2024-03-01T00:00:00Z");
    let users: Vec<UserRecord> = (0..n_users)
        .map(|i| {
            let mut u = user(&format!("u{:03}", i + 1));
            u.region = if rng.gen_bool(0.7) {
                Some(["north", "south", "east"][rng.gen_range(0..3)].to_string())
            } else {
                None
            };
            u.social_class = if rng.gen_bool(0.7) {
                Some(["student", "staff", "public"][rng.gen_range(0..3)].to_string())
            } else {
                None
            };
            u.age_group = AgeGroup::ALL[rng.gen_range(0..AgeGroup::ALL.len())];
            u
        })
        .collect();
    let docs: Vec<DocumentRecord> = (0..n_docs)
        .map(|j| {
            let all = ["history", "law", "arts", "maps", "music"];
            let picks: Vec<&str> = (0..rng.gen_range(1..4))
                .map(|_| all[rng.gen_range(0..all.len())])
                .collect();
            doc(&format!("d{:03}", j + 1), &picks)
        })
        .collect();
    let events: Vec<ConsultationEvent> = (0..n_events)
        .map(|k| {
            let mut e = event(
                &format!("e{:05}", k + 1),
                &users[rng.gen_range(0..n_users)].annotator_ref,
                &docs[rng.gen_range(0..n_docs)].doc_ref,
                "2024-03-01T00:00:00Z",
            );
            e.session_start = base + chrono::Duration::seconds(rng.gen_range(0..86_400));
            e.reason = ConsultationReason::CLOSED[rng.gen_range(0..8)].clone();
            if rng.gen_bool(0.4) {
                let objective =
                    AnnotationObjective::ALL[rng.gen_range(0..AnnotationObjective::ALL.len())];
                let body = format!(
                    "{} {}",
                    BODY_WORDS[rng.gen_range(0..BODY_WORDS.len())],
                    BODY_WORDS[rng.gen_range(0..BODY_WORDS.len())]
                );
                e.annotations = vec![annotation(&format!("a{k}"), objective, &body)];
            }
            e
        })
        .collect();
    RandomLog {
        users,
        docs,
        events,
    }
}

/// A selector whose fixed references are always registered in `log`.
pub fn random_selector(rng: &mut impl Rng, log: &RandomLog) -> QuerySelector {
    let base = ts("2024-03-01T00:00:00Z");
    let user = match rng.gen_range(0..2) {
        0 => RefConstraint::Any,
        _ => RefConstraint::Fixed(
            log.users[rng.gen_range(0..log.users.len())]
                .annotator_ref
                .clone(),
        ),
    };
    let doc = match rng.gen_range(0..2) {
        0 => RefConstraint::Any,
        _ => RefConstraint::Fixed(log.docs[rng.gen_range(0..log.docs.len())].doc_ref.clone()),
    };
    let time = match rng.gen_range(0..3) {
        0 => TimeConstraint::Any,
        1 => {
            if log.events.is_empty() || rng.gen_bool(0.3) {
                TimeConstraint::At(base + chrono::Duration::seconds(rng.gen_range(0..86_400)))
            } else {
                TimeConstraint::At(
                    log.events[rng.gen_range(0..log.events.len())].session_start,
                )
            }
        }
        _ => {
            let a = rng.gen_range(0..86_399);
            let b = rng.gen_range(a + 1..86_400 + 1);
            TimeConstraint::Range {
                start: base + chrono::Duration::seconds(a),
                end: base + chrono::Duration::seconds(b),
            }
        }
    };
    QuerySelector { user, doc, time }
}
