//! Workload generator contract: determinism, planted structure, replay
//! accounting, and the committed golden fixture.

mod common;

use amiedot_core::analytics;
use amiedot_core::model::ts_second;
use amiedot_core::store::Store;
use amiedot_core::workload::{
    generate, load_into, plant_overlaps, replay, to_jsonl, ReplayReport, WorkloadSpec,
};

fn small_spec() -> WorkloadSpec {
    WorkloadSpec {
        seed: 1,
        n_users: 8,
        n_docs: 20,
        n_events: 100,
        n_communities: 2,
        time_span: (
            ts_second::parse("2024-02-01T00:00:00Z").unwrap(),
            ts_second::parse("2024-03-01T00:00:00Z").unwrap(),
        ),
        annotation_rate: 0.5,
    }
}

#[test]
fn identical_specs_generate_byte_identical_output() {
    let a = generate(&small_spec()).unwrap();
    let b = generate(&small_spec()).unwrap();
    assert_eq!(to_jsonl(&a), to_jsonl(&b));
}

#[test]
fn different_seeds_differ() {
    let mut other = small_spec();
    other.seed = 2;
    assert_ne!(to_jsonl(&generate(&small_spec()).unwrap()), to_jsonl(&generate(&other).unwrap()));
}

#[test]
fn zero_annotation_rate_means_zero_annotations() {
    let mut spec = small_spec();
    spec.annotation_rate = 0.0;
    let workload = generate(&spec).unwrap();
    assert!(workload.events.iter().all(|e| e.annotations.is_empty()));
}

#[test]
fn generated_records_are_valid_and_events_sorted() {
    let workload = generate(&small_spec()).unwrap();
    assert_eq!(workload.users.len(), 8);
    assert_eq!(workload.documents.len(), 20);
    assert_eq!(workload.events.len(), 100);
    for pair in workload.events.windows(2) {
        assert!(
            (pair[0].session_start, &pair[0].event_ref)
                <= (pair[1].session_start, &pair[1].event_ref)
        );
    }
    for u in &workload.users {
        amiedot_core::model::validate_user(u).unwrap();
    }
    for d in &workload.documents {
        amiedot_core::model::validate_document(d).unwrap();
    }
}

#[test]
fn spec_bounds_are_enforced() {
    let mut spec = small_spec();
    spec.n_communities = 9; // more communities than users
    assert!(generate(&spec).is_err());
    let mut spec = small_spec();
    spec.annotation_rate = 1.5;
    assert!(generate(&spec).is_err());
    let mut spec = small_spec();
    spec.time_span.1 = spec.time_span.0;
    assert!(generate(&spec).is_err());
    let mut spec = small_spec();
    spec.n_events = 0;
    assert!(generate(&spec).is_err());
}

#[test]
fn in_community_relatedness_beats_cross_community() {
    let mut spec = small_spec();
    spec.n_users = 12;
    spec.n_events = 400;
    let workload = generate(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut store = Store::open(dir.path().join("log.jsonl")).unwrap();
    load_into(&mut store, &workload, false).unwrap();

    // Average pairwise similarity, split by community co-membership,
    // computed on the generated fixture.
    let mut in_sum = 0.0;
    let mut in_n = 0usize;
    let mut cross_sum = 0.0;
    let mut cross_n = 0usize;
    for i in 0..spec.n_users {
        for j in (i + 1)..spec.n_users {
            let sim = analytics::user_similarity(
                &store,
                &WorkloadSpec::user_ref(i),
                &WorkloadSpec::user_ref(j),
            )
            .unwrap();
            if spec.community_of_user(i) == spec.community_of_user(j) {
                in_sum += sim;
                in_n += 1;
            } else {
                cross_sum += sim;
                cross_n += 1;
            }
        }
    }
    let in_avg = in_sum / in_n as f64;
    let cross_avg = cross_sum / cross_n as f64;
    assert!(
        in_avg > cross_avg,
        "in-community average {in_avg} must exceed cross-community {cross_avg}"
    );
}

#[test]
fn clean_batch_replays_without_rejections() {
    let workload = generate(&small_spec()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut store = Store::open(dir.path().join("log.jsonl")).unwrap();
    let report = load_into(&mut store, &workload, true).unwrap();
    assert_eq!(
        report,
        ReplayReport {
            accepted: 100,
            rejected: 0
        }
    );
}

#[test]
fn planted_overlaps_are_rejected_exactly() {
    let mut workload = generate(&small_spec()).unwrap();
    let planted = plant_overlaps(&mut workload, 12, 99).unwrap();
    assert_eq!(planted.len(), 12);

    let dir = tempfile::tempdir().unwrap();
    let mut store = Store::open(dir.path().join("log.jsonl")).unwrap();
    let report = load_into(&mut store, &workload, true).unwrap();
    assert_eq!(report.accepted, 100);
    assert_eq!(report.rejected, 12);

    // None of the planted refs made it in; every base event did.
    for r in &planted {
        assert!(store.events().iter().all(|e| e.event_ref != *r));
    }
}

#[test]
fn empty_batch_reports_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = Store::open(dir.path().join("log.jsonl")).unwrap();
    let report = replay(&mut store, &[], true).unwrap();
    assert_eq!(
        report,
        ReplayReport {
            accepted: 0,
            rejected: 0
        }
    );
}

#[test]
fn fixture_doubles_as_import_file() {
    let workload = generate(&small_spec()).unwrap();
    let jsonl = to_jsonl(&workload);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("import.jsonl");
    std::fs::write(&path, &jsonl).unwrap();

    // The emitted file IS a valid log: opening it as a store must yield
    // exactly the generated records.
    let store = Store::open(&path).unwrap();
    assert!(store.warnings().is_empty());
    assert_eq!(store.stats().n_users, 8);
    assert_eq!(store.stats().n_docs, 20);
    assert_eq!(store.events(), workload.events.as_slice());
}

#[test]
fn golden_fixture_is_reproduced_byte_for_byte() {
    let spec = WorkloadSpec {
        seed: 7,
        n_users: 6,
        n_docs: 10,
        n_events: 30,
        n_communities: 2,
        time_span: (
            ts_second::parse("2024-02-01T00:00:00Z").unwrap(),
            ts_second::parse("2024-03-01T00:00:00Z").unwrap(),
        ),
        annotation_rate: 0.5,
    };
    let generated = to_jsonl(&generate(&spec).unwrap());
    let committed = include_str!("data/golden_workload.jsonl");
    assert_eq!(generated, committed);
}

#[test]
fn community_doc_blocks_partition_the_documents() {
    let spec = WorkloadSpec {
        n_docs: 10,
        n_communities: 3,
        ..small_spec()
    };
    // ceil(10/3) = 4 → blocks 0..4, 4..8, 8..10.
    assert_eq!(spec.community_docs(0), 0..4);
    assert_eq!(spec.community_docs(1), 4..8);
    assert_eq!(spec.community_docs(2), 8..10);
}
