//! Deterministic synthetic fixtures: users, documents, and a timed
//! consultation/annotation stream with planted community structure.
//!
//! Generation is a pure function of [`WorkloadSpec`]: the random source is
//! ChaCha8 seeded from `spec.seed`, so identical specs give byte-identical
//! output across runs and machines (a golden fixture in the test data pins
//! this). Users are assigned to communities round-robin; each community
//! owns a contiguous block of documents and members consult in-community
//! documents with probability 0.8, otherwise uniformly.
//!
//! Durations are bounded by the gap to the next consultation of the same
//! document, so a generated stream replays cleanly under strict lending;
//! [`plant_overlaps`] injects conflicts on demand.

use std::collections::HashMap;

use chrono::{DateTime, NaiveDate, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    ts_second, AgeGroup, AnnotationLocation, AnnotationObjective, AnnotationRecord,
    AnnotationType, Approach, AreaOfActivity, AuthorName, ConsultationEvent, ConsultationReason,
    DocumentFormat, DocumentRecord, UserRecord,
};
use crate::store::{LogRecord, Store};

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub seed: u64,
    pub n_users: usize,
    pub n_docs: usize,
    pub n_events: usize,
    pub n_communities: usize,
    pub time_span: (DateTime<Utc>, DateTime<Utc>),
    /// Probability that an event carries an annotation.
    pub annotation_rate: f64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            seed: 42,
            n_users: 40,
            n_docs: 200,
            n_events: 2000,
            n_communities: 2,
            time_span: (
                ts_second::parse("2024-01-01T00:00:00Z").unwrap(),
                ts_second::parse("2025-01-01T00:00:00Z").unwrap(),
            ),
            annotation_rate: 0.35,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_docs == 0 || self.n_events == 0 {
            return Err(Error::validation(
                "workload",
                "n_users, n_docs, and n_events must be positive",
            ));
        }
        if self.n_communities == 0 || self.n_communities > self.n_users {
            return Err(Error::validation(
                "n_communities",
                "must be positive and at most n_users",
            ));
        }
        if self.time_span.0 >= self.time_span.1 {
            return Err(Error::validation("time_span", "start must precede end"));
        }
        if !(0.0..=1.0).contains(&self.annotation_rate) {
            return Err(Error::validation("annotation_rate", "must be within [0, 1]"));
        }
        Ok(())
    }

    pub fn user_ref(index: usize) -> String {
        format!("u{:04}", index + 1)
    }

    pub fn doc_ref(index: usize) -> String {
        format!("d{:04}", index + 1)
    }

    /// Users are dealt to communities round-robin.
    pub fn community_of_user(&self, user_index: usize) -> usize {
        user_index % self.n_communities
    }

    /// Each community owns a contiguous block of ⌈n_docs / n_communities⌉
    /// document indexes (the last block may be shorter).
    pub fn community_docs(&self, community: usize) -> std::ops::Range<usize> {
        let per = self.n_docs.div_ceil(self.n_communities);
        let start = (community * per).min(self.n_docs);
        let end = ((community + 1) * per).min(self.n_docs);
        start..end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub users: Vec<UserRecord>,
    pub documents: Vec<DocumentRecord>,
    /// Sorted by `(session_start, event_ref)`.
    pub events: Vec<ConsultationEvent>,
}

const FIRST_NAMES: [&str; 12] = [
    "Ada", "Blaise", "Carl", "Dora", "Emmy", "Felix", "Grace", "Henri", "Iris", "Jean", "Kurt",
    "Lise",
];
const LAST_NAMES: [&str; 12] = [
    "Arnaud", "Bernard", "Curie", "Dupont", "Euler", "Fourier", "Germain", "Hilbert", "Ibarra",
    "Jordan", "Klein", "Laurent",
];
const REGIONS: [&str; 6] = ["alsace", "brittany", "corsica", "dauphine", "euskadi", "flanders"];
const COUNTRIES: [&str; 6] = ["france", "belgium", "switzerland", "canada", "senegal", "morocco"];
const SOCIAL_CLASSES: [&str; 4] = ["student", "staff", "faculty", "public"];
const KEYWORD_POOL: [&str; 16] = [
    "annotation", "archives", "cataloguing", "classification", "corpora", "indexing", "lending",
    "linguistics", "metadata", "paleography", "provenance", "retrieval", "semantics", "serials",
    "taxonomy", "typography",
];
const COMMUNITY_TAGS: [&str; 6] = ["history", "biology", "law", "arts", "physics", "music"];
const TITLE_ADJECTIVES: [&str; 6] =
    ["Annotated", "Collected", "Critical", "Early", "Illustrated", "Selected"];
const TITLE_NOUNS: [&str; 6] = ["Essays", "Letters", "Manuscripts", "Papers", "Proceedings", "Surveys"];
const ABSTRACTS: [&str; 4] = [
    "A short survey of the topic.",
    "Collected notes and commentary.",
    "An introductory treatment.",
    "A reference compilation.",
];
const BODY_PHRASES: [&str; 12] = [
    "clear survey of the field",
    "dense but rewarding chapter",
    "disputed claim needs checking",
    "excellent reference tables",
    "helpful worked examples",
    "incomplete bibliography here",
    "key argument starts here",
    "methods section is thorough",
    "quote this passage later",
    "terminology differs from ours",
    "weak evidence in appendix",
    "useful summary of sources",
];

fn pick<'a, T>(rng: &mut ChaCha8Rng, pool: &'a [T]) -> &'a T {
    &pool[rng.gen_range(0..pool.len())]
}

/// Produces the full fixture for a spec. Identical specs give identical
/// output.
pub fn generate(spec: &WorkloadSpec) -> Result<Workload> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let users: Vec<UserRecord> = (0..spec.n_users)
        .map(|i| {
            let annotator_ref = WorkloadSpec::user_ref(i);
            let email = format!("{annotator_ref}@example.org");
            UserRecord {
                first_name: pick(&mut rng, &FIRST_NAMES).to_string(),
                last_name: pick(&mut rng, &LAST_NAMES).to_string(),
                email,
                postal_address: rng
                    .gen_bool(0.3)
                    .then(|| format!("BP {}", rng.gen_range(100..1000))),
                region: rng.gen_bool(0.8).then(|| pick(&mut rng, &REGIONS).to_string()),
                age_group: *pick(&mut rng, &AgeGroup::ALL),
                country: rng.gen_bool(0.7).then(|| pick(&mut rng, &COUNTRIES).to_string()),
                social_class: rng
                    .gen_bool(0.8)
                    .then(|| pick(&mut rng, &SOCIAL_CLASSES).to_string()),
                area_of_activity: match rng.gen_range(0..5) {
                    0 => AreaOfActivity::Teaching,
                    1 => AreaOfActivity::Research,
                    2 => AreaOfActivity::Student,
                    3 => AreaOfActivity::GeneralPublic,
                    _ => AreaOfActivity::Other("archivist".into()),
                },
                annotator_ref,
            }
        })
        .collect();

    let doc_community: Vec<usize> = {
        let mut owner = vec![0usize; spec.n_docs];
        for community in 0..spec.n_communities {
            for doc in spec.community_docs(community) {
                owner[doc] = community;
            }
        }
        owner
    };
    let documents: Vec<DocumentRecord> = (0..spec.n_docs)
        .map(|j| {
            let mut keywords: std::collections::BTreeSet<String> =
                [COMMUNITY_TAGS[doc_community[j] % COMMUNITY_TAGS.len()].to_string()]
                    .into_iter()
                    .collect();
            for _ in 0..rng.gen_range(2..=4) {
                keywords.insert(pick(&mut rng, &KEYWORD_POOL).to_string());
            }
            DocumentRecord {
                doc_ref: WorkloadSpec::doc_ref(j),
                title: format!(
                    "{} {} No. {}",
                    pick(&mut rng, &TITLE_ADJECTIVES),
                    pick(&mut rng, &TITLE_NOUNS),
                    j + 1
                ),
                keywords,
                authors: (0..rng.gen_range(1..=2))
                    .map(|_| AuthorName {
                        first_name: pick(&mut rng, &FIRST_NAMES).to_string(),
                        last_name: pick(&mut rng, &LAST_NAMES).to_string(),
                    })
                    .collect(),
                publication_date: NaiveDate::from_ymd_opt(
                    rng.gen_range(1980..2024),
                    rng.gen_range(1..=12),
                    rng.gen_range(1..=28),
                ),
                format: match rng.gen_range(0..4) {
                    0 => DocumentFormat::Pdf,
                    1 => DocumentFormat::Word,
                    2 => DocumentFormat::Html,
                    _ => DocumentFormat::Text,
                },
                abstract_text: rng.gen_bool(0.5).then(|| pick(&mut rng, &ABSTRACTS).to_string()),
            }
        })
        .collect();

    // Draw the raw stream: who, what, when, why, with what annotation.
    let span_seconds = (spec.time_span.1 - spec.time_span.0).num_seconds();
    let mut annotation_counter = 0usize;
    struct Draft {
        user: usize,
        doc: usize,
        at: DateTime<Utc>,
        reason: ConsultationReason,
        annotations: Vec<AnnotationRecord>,
    }
    let mut drafts: Vec<Draft> = (0..spec.n_events)
        .map(|_| {
            let user = rng.gen_range(0..spec.n_users);
            let community = spec.community_of_user(user);
            let own_docs = spec.community_docs(community);
            let doc = if !own_docs.is_empty() && rng.gen_bool(0.8) {
                rng.gen_range(own_docs.start..own_docs.end)
            } else {
                rng.gen_range(0..spec.n_docs)
            };
            let at = spec.time_span.0 + chrono::Duration::seconds(rng.gen_range(0..span_seconds));
            let reason = if rng.gen_bool(0.1) {
                ConsultationReason::Other("syllabus-planning".into())
            } else {
                pick(&mut rng, &ConsultationReason::CLOSED).clone()
            };
            let annotations = if rng.gen_bool(spec.annotation_rate) {
                annotation_counter += 1;
                vec![AnnotationRecord {
                    annotation_ref: format!("a{annotation_counter:06}"),
                    a_type: *pick(&mut rng, AnnotationType::ALL),
                    location: *pick(&mut rng, AnnotationLocation::ALL),
                    objective: *pick(&mut rng, AnnotationObjective::ALL),
                    body: pick(&mut rng, &BODY_PHRASES).to_string(),
                }]
            } else {
                Vec::new()
            };
            Draft {
                user,
                doc,
                at,
                reason,
                annotations,
            }
        })
        .collect();
    drafts.sort_by_key(|d| d.at); // stable: creation order breaks ties

    // Event refs follow the time order; approach and durations need the
    // sorted view.
    let mut first_seen: HashMap<(usize, usize), DateTime<Utc>> = HashMap::new();
    let mut events: Vec<ConsultationEvent> = drafts
        .iter()
        .enumerate()
        .map(|(i, draft)| {
            let approach = match first_seen.get(&(draft.user, draft.doc)) {
                Some(&first) if first < draft.at && rng.gen_bool(0.6) => Approach::FollowUp,
                _ => Approach::NewAnnotation,
            };
            first_seen.entry((draft.user, draft.doc)).or_insert(draft.at);
            ConsultationEvent {
                event_ref: format!("e{:06}", i + 1),
                context_ref: None,
                annotator_ref: WorkloadSpec::user_ref(draft.user),
                doc_ref: WorkloadSpec::doc_ref(draft.doc),
                session_start: draft.at,
                duration_seconds: None,
                approach,
                reason: draft.reason.clone(),
                annotations: draft.annotations.clone(),
            }
        })
        .collect();

    // Durations, bounded so no two intervals on the same document touch:
    // each stays short of the next consultation of that document.
    let mut per_doc: Vec<Vec<usize>> = vec![Vec::new(); spec.n_docs];
    for (position, draft) in drafts.iter().enumerate() {
        per_doc[draft.doc].push(position);
    }
    for positions in &per_doc {
        for (k, &position) in positions.iter().enumerate() {
            if !rng.gen_bool(0.5) {
                continue;
            }
            let cap = match positions.get(k + 1) {
                Some(&next) => {
                    (events[next].session_start - events[position].session_start).num_seconds()
                }
                None => 7200,
            };
            if cap >= 1 {
                events[position].duration_seconds = Some(rng.gen_range(1..=cap.min(7200)));
            }
        }
    }

    Ok(Workload {
        users,
        documents,
        events,
    })
}

/// Injects `count` lending conflicts: for each chosen interval-bearing
/// event, a new event by a different user starts strictly inside the held
/// interval. Returns the planted event refs (`x`-prefixed). Replaying the
/// batch under strict lending rejects exactly these.
pub fn plant_overlaps(workload: &mut Workload, count: usize, seed: u64) -> Result<Vec<String>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if workload.users.len() < 2 {
        return Err(Error::validation(
            "workload",
            "planting overlaps needs at least two users",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates: Vec<usize> = workload
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.duration_seconds.is_some_and(|d| d >= 2))
        .map(|(i, _)| i)
        .collect();
    if candidates.len() < count {
        return Err(Error::validation(
            "count",
            format!(
                "only {} interval-bearing events available to conflict with",
                candidates.len()
            ),
        ));
    }
    candidates.shuffle(&mut rng);
    candidates.truncate(count);

    let user_index: HashMap<&str, usize> = workload
        .users
        .iter()
        .enumerate()
        .map(|(i, u)| (u.annotator_ref.as_str(), i))
        .collect();

    let mut planted = Vec::with_capacity(count);
    let mut conflicts = Vec::with_capacity(count);
    for (i, &base_position) in candidates.iter().enumerate() {
        let base = &workload.events[base_position];
        let holder = user_index[base.annotator_ref.as_str()];
        let intruder = {
            let raw = rng.gen_range(0..workload.users.len() - 1);
            if raw >= holder {
                raw + 1
            } else {
                raw
            }
        };
        let offset = (base.duration_seconds.unwrap() / 2).max(1);
        let event_ref = format!("x{:06}", i + 1);
        planted.push(event_ref.clone());
        conflicts.push(ConsultationEvent {
            event_ref,
            context_ref: None,
            annotator_ref: WorkloadSpec::user_ref(intruder),
            doc_ref: base.doc_ref.clone(),
            session_start: base.session_start + chrono::Duration::seconds(offset),
            duration_seconds: Some(rng.gen_range(60..=900)),
            approach: Approach::NewAnnotation,
            reason: pick(&mut rng, &ConsultationReason::CLOSED).clone(),
            annotations: Vec::new(),
        });
    }
    workload.events.extend(conflicts);
    workload.events.sort_by(|a, b| {
        a.session_start
            .cmp(&b.session_start)
            .then_with(|| a.event_ref.cmp(&b.event_ref))
    });
    Ok(planted)
}

/// Outcome tally of a batch ingest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ReplayReport {
    pub accepted: u64,
    pub rejected: u64,
}

/// Ingests a batch in timestamp order. Per-event failures are tallied,
/// never abort the batch; only I/O-class failures do.
pub fn replay(
    store: &mut Store,
    events: &[ConsultationEvent],
    strict_lending: bool,
) -> Result<ReplayReport> {
    let mut order: Vec<&ConsultationEvent> = events.iter().collect();
    order.sort_by(|a, b| {
        a.session_start
            .cmp(&b.session_start)
            .then_with(|| a.event_ref.cmp(&b.event_ref))
    });
    let mut report = ReplayReport {
        accepted: 0,
        rejected: 0,
    };
    for event in order {
        match store.ingest_event(event.clone(), strict_lending) {
            Ok(()) => report.accepted += 1,
            Err(e @ (Error::Io(_) | Error::CorruptLog { .. })) => return Err(e),
            Err(_) => report.rejected += 1,
        }
    }
    Ok(report)
}

/// Renders a workload in the store's JSON-Lines record format, so fixtures
/// double as import files: users, then documents, then events.
pub fn to_jsonl(workload: &Workload) -> String {
    let mut out = String::new();
    let mut push = |record: LogRecord| {
        out.push_str(&serde_json::to_string(&record).expect("records serialize"));
        out.push('\n');
    };
    for user in &workload.users {
        push(LogRecord::User(user.clone()));
    }
    for doc in &workload.documents {
        push(LogRecord::Document(doc.clone()));
    }
    for event in &workload.events {
        push(LogRecord::Event(event.clone()));
    }
    out
}

/// Registers a workload's users and documents, then replays its events.
pub fn load_into(
    store: &mut Store,
    workload: &Workload,
    strict_lending: bool,
) -> Result<ReplayReport> {
    for user in &workload.users {
        store.register_user(user.clone())?;
    }
    for doc in &workload.documents {
        store.register_document(doc.clone())?;
    }
    replay(store, &workload.events, strict_lending)
}
