//! Store contract: registration, ingest rules, strict lending, durability,
//! and recovery from damaged logs.

mod common;

use common::*;

use amiedot_core::error::Error;
use amiedot_core::model::{Approach, QuerySelector, TimeConstraint};
use amiedot_core::store::{LogRecord, Store};

#[test]
fn register_user_is_idempotent_for_identical_records() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = store_with(&dir, &[], &[], &[]);
    let u = user("u1");
    store.register_user(u.clone()).unwrap();
    store.register_user(u).unwrap();
    assert_eq!(store.stats().n_users, 1);
}

#[test]
fn register_user_rejects_changed_content() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = store_with(&dir, &[user("u1")], &[], &[]);
    let mut changed = user("u1");
    changed.email = "changed@example.org".into();
    match store.register_user(changed).unwrap_err() {
        Error::Duplicate { kind, reference } => {
            assert_eq!(kind, "user");
            assert_eq!(reference, "u1");
        }
        other => panic!("unexpected error {other:?}"),
    }
}

#[test]
fn registering_two_users_counts_two() {
    let dir = tempfile::tempdir().unwrap();
    let store = store_with(&dir, &[user("u1"), user("u2")], &[], &[]);
    assert_eq!(store.stats().n_users, 2);
}

#[test]
fn register_document_mirrors_user_semantics() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = store_with(&dir, &[], &[doc("d1", &["history"])], &[]);
    assert!(store.document("d1").is_some());
    store.register_document(doc("d1", &["history"])).unwrap();
    let mut changed = doc("d1", &["history"]);
    changed.title = "Another title".into();
    assert!(matches!(
        store.register_document(changed),
        Err(Error::Duplicate { kind: "document", .. })
    ));
}

#[test]
fn register_document_lowercases_keywords() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = store_with(&dir, &[], &[], &[]);
    store.register_document(doc("d1", &["History", "MAPS"])).unwrap();
    let stored = store.document("d1").unwrap();
    assert!(stored.keywords.contains("history"));
    assert!(stored.keywords.contains("maps"));
    assert_eq!(stored.keywords.len(), 2);
}

#[test]
fn ingest_rejects_unregistered_references() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = store_with(&dir, &[user("u1")], &[doc("d1", &[])], &[]);
    let err = store
        .ingest_event(event("e1", "u1", "dX", "2024-01-01T00:00:00Z"), false)
        .unwrap_err();
    assert!(matches!(err, Error::UnknownDocument(d) if d == "dX"));
    let err = store
        .ingest_event(event("e1", "uX", "d1", "2024-01-01T00:00:00Z"), false)
        .unwrap_err();
    assert!(matches!(err, Error::UnknownUser(u) if u == "uX"));
}

#[test]
fn first_event_cannot_be_follow_up() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = store_with(&dir, &[user("u1")], &[doc("d1", &[])], &[]);
    let mut ev = event("e1", "u1", "d1", "2024-01-01T00:00:00Z");
    ev.approach = Approach::FollowUp;
    match store.ingest_event(ev, false).unwrap_err() {
        Error::Validation(v) => assert!(v.mentions("approach")),
        other => panic!("unexpected error {other:?}"),
    }
}

#[test]
fn follow_up_requires_strictly_earlier_prior() {
    let dir = tempfile::tempdir().unwrap();
    let first = event("e1", "u1", "d1", "2024-01-01T10:00:00Z");
    let mut store = store_with(&dir, &[user("u1")], &[doc("d1", &[])], &[first]);

    // Same second is not strictly earlier.
    let mut same_second = event("e2", "u1", "d1", "2024-01-01T10:00:00Z");
    same_second.approach = Approach::FollowUp;
    assert!(store.ingest_event(same_second, false).is_err());

    let mut later = event("e3", "u1", "d1", "2024-01-01T11:00:00Z");
    later.approach = Approach::FollowUp;
    store.ingest_event(later, false).unwrap();
}

#[test]
fn duplicate_event_ref_is_idempotent_when_identical() {
    let dir = tempfile::tempdir().unwrap();
    let ev = event("e1", "u1", "d1", "2024-01-01T00:00:00Z");
    let mut store = store_with(&dir, &[user("u1")], &[doc("d1", &[])], &[ev.clone()]);
    store.ingest_event(ev.clone(), false).unwrap();
    assert_eq!(store.stats().n_events, 1);
    let mut changed = ev;
    changed.duration_seconds = Some(60);
    assert!(matches!(
        store.ingest_event(changed, false),
        Err(Error::Duplicate { kind: "event", .. })
    ));
}

#[test]
fn strict_lending_rejects_concurrent_use_by_another_user() {
    let dir = tempfile::tempdir().unwrap();
    let mut held = event("e1", "u1", "d1", "2024-01-01T10:00:00Z");
    held.duration_seconds = Some(3600);
    let mut store = store_with(&dir, &[user("u1"), user("u2")], &[doc("d1", &[])], &[]);
    store.ingest_event(held, true).unwrap();

    let mut intruding = event("e2", "u2", "d1", "2024-01-01T10:01:40Z");
    intruding.duration_seconds = Some(600);
    match store.ingest_event(intruding, true).unwrap_err() {
        Error::LendingOverlap {
            doc_ref,
            conflicting_event_ref,
        } => {
            assert_eq!(doc_ref, "d1");
            assert_eq!(conflicting_event_ref, "e1");
        }
        other => panic!("unexpected error {other:?}"),
    }
}

#[test]
fn lending_constraint_is_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let mut held = event("e1", "u1", "d1", "2024-01-01T10:00:00Z");
    held.duration_seconds = Some(3600);
    let mut intruding = event("e2", "u2", "d1", "2024-01-01T10:01:40Z");
    intruding.duration_seconds = Some(600);
    let mut store = store_with(&dir, &[user("u1"), user("u2")], &[doc("d1", &[])], &[]);
    store.ingest_event(held, false).unwrap();
    store.ingest_event(intruding, false).unwrap();
    assert_eq!(store.stats().n_events, 2);
}

#[test]
fn strict_lending_allows_same_user_and_durationless_events() {
    let dir = tempfile::tempdir().unwrap();
    let mut held = event("e1", "u1", "d1", "2024-01-01T10:00:00Z");
    held.duration_seconds = Some(3600);
    let mut store = store_with(&dir, &[user("u1"), user("u2")], &[doc("d1", &[])], &[]);
    store.ingest_event(held, true).unwrap();

    // Same user inside their own interval.
    let mut own = event("e2", "u1", "d1", "2024-01-01T10:10:00Z");
    own.duration_seconds = Some(60);
    store.ingest_event(own, true).unwrap();

    // Another user without an interval occupies nothing.
    let point = event("e3", "u2", "d1", "2024-01-01T10:20:00Z");
    store.ingest_event(point, true).unwrap();

    // Back-to-back intervals (end exclusive) do not intersect.
    let mut adjacent = event("e4", "u2", "d1", "2024-01-01T11:00:00Z");
    adjacent.duration_seconds = Some(600);
    store.ingest_event(adjacent, true).unwrap();
}

#[test]
fn query_all_returns_every_event_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let events = [
        event("e2", "u1", "d1", "2024-01-01T11:00:00Z"),
        event("e1", "u1", "d2", "2024-01-01T10:00:00Z"),
        event("e3", "u2", "d1", "2024-01-01T11:00:00Z"),
    ];
    let store = store_with(
        &dir,
        &[user("u1"), user("u2")],
        &[doc("d1", &[]), doc("d2", &[])],
        &events,
    );
    let all = store.query(&QuerySelector::all()).unwrap();
    assert_eq!(refs(&all), ["e1", "e2", "e3"]);
}

#[test]
fn fully_fixed_query_pinpoints_one_use() {
    let dir = tempfile::tempdir().unwrap();
    let events = [
        event("e1", "u1", "d1", "2024-01-01T10:00:00Z"),
        event("e2", "u1", "d1", "2024-01-01T11:00:00Z"),
        event("e3", "u2", "d1", "2024-01-01T10:00:00Z"),
    ];
    let store = store_with(&dir, &[user("u1"), user("u2")], &[doc("d1", &[])], &events);
    let selector = QuerySelector::all()
        .with_user("u1")
        .with_doc("d1")
        .with_time(TimeConstraint::at(ts("2024-01-01T10:00:00Z")));
    let hits = store.query(&selector).unwrap();
    assert_eq!(refs(&hits), ["e1"]);
}

#[test]
fn query_distinguishes_no_events_from_no_such_entity() {
    let dir = tempfile::tempdir().unwrap();
    let store = store_with(&dir, &[user("u1")], &[doc("d1", &[])], &[]);
    // Registered but eventless: empty result.
    assert!(store
        .query(&QuerySelector::all().with_user("u1"))
        .unwrap()
        .is_empty());
    // Never registered: an error.
    assert!(matches!(
        store.query(&QuerySelector::all().with_user("ghost")),
        Err(Error::UnknownUser(_))
    ));
    assert!(matches!(
        store.query(&QuerySelector::all().with_doc("ghost")),
        Err(Error::UnknownDocument(_))
    ));
}

#[test]
fn query_rejects_inverted_range() {
    let dir = tempfile::tempdir().unwrap();
    let store = store_with(&dir, &[], &[], &[]);
    let selector = QuerySelector::all().with_time(TimeConstraint::Range {
        start: ts("2024-02-01T00:00:00Z"),
        end: ts("2024-01-01T00:00:00Z"),
    });
    assert!(matches!(store.query(&selector), Err(Error::Validation(_))));
}

#[test]
fn stats_track_counts_and_span() {
    let dir = tempfile::tempdir().unwrap();
    let store = store_with(&dir, &[], &[], &[]);
    let empty = store.stats();
    assert_eq!(
        (empty.n_users, empty.n_docs, empty.n_events, empty.n_annotations),
        (0, 0, 0, 0)
    );
    assert!(empty.time_span.is_none());
    drop(store);

    let dir = tempfile::tempdir().unwrap();
    let mut e3 = event("e3", "u1", "d1", "2024-01-03T00:00:00Z");
    e3.annotations = vec![annotation(
        "a1",
        amiedot_core::model::AnnotationObjective::Summary,
        "useful",
    )];
    let store = store_with(
        &dir,
        &[user("u1")],
        &[doc("d1", &[])],
        &[
            event("e1", "u1", "d1", "2024-01-02T00:00:00Z"),
            event("e2", "u1", "d1", "2024-01-01T00:00:00Z"),
            e3,
        ],
    );
    let stats = store.stats();
    assert_eq!(stats.n_events, 3);
    assert_eq!(stats.n_annotations, 1);
    let span = stats.time_span.unwrap();
    assert_eq!(span.min, ts("2024-01-01T00:00:00Z"));
    assert_eq!(span.max, ts("2024-01-03T00:00:00Z"));
}

#[test]
fn reopen_preserves_events_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(11);
    let log = random_log(&mut rng, 5, 8, 50);
    let store = store_with(&dir, &log.users, &log.docs, &log.events);
    let before: Vec<_> = store.events().to_vec();
    let before_all = refs(&store.query(&QuerySelector::all()).unwrap());
    let stats_before = store.stats();
    store.close().unwrap();

    let reopened = Store::open(dir.path().join("log.jsonl")).unwrap();
    assert!(reopened.warnings().is_empty());
    assert_eq!(reopened.events(), before.as_slice());
    assert_eq!(refs(&reopened.query(&QuerySelector::all()).unwrap()), before_all);
    assert_eq!(reopened.stats(), stats_before);
}

#[test]
fn reopen_missing_path_is_a_fresh_store() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path().join("nothing-here.jsonl")).unwrap();
    assert_eq!(store.stats().n_events, 0);
    assert!(store.query(&QuerySelector::all()).unwrap().is_empty());
}

#[test]
fn partial_trailing_line_is_truncated_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(12);
    let log = random_log(&mut rng, 3, 4, 50);
    store_with(&dir, &log.users, &log.docs, &log.events)
        .close()
        .unwrap();

    // Chop the final record in half, as a crashed append would.
    let content = std::fs::read_to_string(&path).unwrap();
    let body = content.strip_suffix('\n').unwrap();
    let last_line_start = body.rfind('\n').unwrap() + 1;
    let cut = last_line_start + (body.len() - last_line_start) / 2;
    std::fs::write(&path, &content[..cut]).unwrap();

    let store = Store::open(&path).unwrap();
    assert_eq!(store.events().len(), 49);
    assert_eq!(store.warnings().len(), 1);
    assert!(store.warnings()[0].contains("partial trailing line"));

    // The damage is gone from disk: appends work and a re-reopen is clean.
    let mut store = store;
    store
        .ingest_event(
            event("fresh", &log.users[0].annotator_ref, &log.docs[0].doc_ref, "2024-03-02T00:00:00Z"),
            false,
        )
        .unwrap();
    store.close().unwrap();
    let again = Store::open(&path).unwrap();
    assert!(again.warnings().is_empty());
    assert_eq!(again.events().len(), 50);
}

#[test]
fn garbage_mid_file_reports_corrupt_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    let log = {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(13);
        random_log(&mut rng, 2, 2, 5)
    };
    store_with(&dir, &log.users, &log.docs, &log.events)
        .close()
        .unwrap();

    let content = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = content.lines().collect();
    lines[3] = "this is not a record";
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();

    match Store::open(&path).unwrap_err() {
        Error::CorruptLog { line, .. } => assert_eq!(line, 4),
        other => panic!("unexpected error {other:?}"),
    }
}

#[test]
fn unterminated_final_line_that_parses_is_kept() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    store_with(&dir, &[user("u1")], &[], &[]).close().unwrap();
    let mut content = std::fs::read(&path).unwrap();
    assert_eq!(content.pop(), Some(b'\n'));
    std::fs::write(&path, &content).unwrap();

    let mut store = Store::open(&path).unwrap();
    assert_eq!(store.stats().n_users, 1);
    store.register_document(doc("d1", &[])).unwrap();
    store.close().unwrap();
    let again = Store::open(&path).unwrap();
    assert_eq!(again.stats(), amiedot_core::StoreStats {
        n_users: 1,
        n_docs: 1,
        n_events: 0,
        n_annotations: 0,
        time_span: None,
    });
}

#[test]
fn log_lines_carry_kind_and_body() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    let mut store = Store::open(&path).unwrap();
    store.register_user(user("u1")).unwrap();
    store.register_document(doc("d1", &["history"])).unwrap();
    store
        .ingest_event(event("e1", "u1", "d1", "2024-01-01T00:00:00Z"), false)
        .unwrap();
    store.close().unwrap();

    let content = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = content.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with(r#"{"kind":"user","body":{"#));
    assert!(lines[1].starts_with(r#"{"kind":"document","body":{"#));
    assert!(lines[2].starts_with(r#"{"kind":"event","body":{"#));
    for line in lines {
        serde_json::from_str::<LogRecord>(line).unwrap();
    }
}

#[test]
fn canonical_event_encoding_is_pinned() {
    let mut ev = event("e1", "u1", "d1", "2024-01-01T10:00:00Z");
    ev.context_ref = Some("c1".into());
    ev.duration_seconds = Some(600);
    ev.annotations = vec![annotation(
        "a1",
        amiedot_core::model::AnnotationObjective::Summary,
        "nice",
    )];
    let json = serde_json::to_string(&ev).unwrap();
    assert_eq!(
        json,
        r#"{"event_ref":"e1","context_ref":"c1","annotator_ref":"u1","doc_ref":"d1","session_start":"2024-01-01T10:00:00Z","duration_seconds":600,"approach":"new-annotation","reason":"academic-reading","annotations":[{"annotation_ref":"a1","a_type":"text","location":"left-margin","objective":"summary","body":"nice"}]}"#
    );
}
