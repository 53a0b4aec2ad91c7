mod common;

use std::io::Write;

use common::*;
use pfm_core::chronicle::{event_from_value, export_jsonl, import_jsonl, Event};
use pfm_core::model::{Severity, StaticConstraint};
use pfm_core::store::{AppendOutcome, StoreError, UserStore};
use serde_json::json;

fn meal(id: &str, dish: &str, at: &str) -> Event {
    event_from_value(
        json!({"event_id": id, "user_id": "ana", "type": "food", "schema_version": 1,
               "what": {"dish": dish}, "when": {"eaten_at": at, "logged_at": at, "tz_offset_min": 0}}),
        1,
    )
    .unwrap()
}

#[test]
fn replaying_an_event_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let store = UserStore::open(dir.path()).unwrap();
    let e = meal("m1", "pasta", "2024-01-01T12:00:00Z");
    assert_eq!(store.append_event("ana", &e).unwrap(), AppendOutcome::Created);
    assert_eq!(store.append_event("ana", &e).unwrap(), AppendOutcome::Existing);
    assert_eq!(store.chronicle("ana").unwrap().len(), 1);
}

#[test]
fn reused_id_with_new_body_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let store = UserStore::open(dir.path()).unwrap();
    store.append_event("ana", &meal("m1", "pasta", "2024-01-01T12:00:00Z")).unwrap();
    let err = store.append_event("ana", &meal("m1", "salad", "2024-01-01T12:00:00Z")).unwrap_err();
    assert_eq!(err, StoreError::Conflict("m1".into()));
    assert_eq!(store.chronicle("ana").unwrap().len(), 1);
}

#[test]
fn torn_tail_is_dropped_and_overwritten() {
    let dir = tempfile::tempdir().unwrap();
    let store = UserStore::open(dir.path()).unwrap();
    store.append_event("ana", &meal("m1", "pasta", "2024-01-01T12:00:00Z")).unwrap();
    let path = store.chronicle_path("ana").unwrap();
    let mut f = std::fs::OpenOptions::new().append(true).open(&path).unwrap();
    f.write_all(br#"{"event_id":"m2","user_id":"ana","ty"#).unwrap();
    drop(f);

    assert_eq!(store.chronicle("ana").unwrap().len(), 1);
    store.append_event("ana", &meal("m3", "salad", "2024-01-01T19:00:00Z")).unwrap();
    let c = store.chronicle("ana").unwrap();
    let ids: Vec<&str> = c.events().iter().map(|e| e.id()).collect();
    assert_eq!(ids, ["m1", "m3"]);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.ends_with('\n'));
}

#[test]
fn corrupt_middle_line_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let store = UserStore::open(dir.path()).unwrap();
    store.append_event("ana", &meal("m1", "pasta", "2024-01-01T12:00:00Z")).unwrap();
    let path = store.chronicle_path("ana").unwrap();
    let mut f = std::fs::OpenOptions::new().append(true).open(&path).unwrap();
    f.write_all(b"not json\n").unwrap();
    drop(f);
    assert!(matches!(store.chronicle("ana"), Err(StoreError::Chronicle(_))));
}

#[test]
fn user_ids_are_checked() {
    let dir = tempfile::tempdir().unwrap();
    let store = UserStore::open(dir.path()).unwrap();
    assert!(matches!(store.chronicle("../etc"), Err(StoreError::InvalidUserId(_))));
    assert_eq!(store.chronicle("nobody").unwrap_err(), StoreError::UnknownUser("nobody".into()));
}

#[test]
fn constraints_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let store = UserStore::open(dir.path()).unwrap();
    assert!(store.constraints("ana").unwrap().is_empty());
    let cs = vec![StaticConstraint {
        item_id: "peanut".into(),
        severity: Severity::Hard,
        note: "allergy".into(),
    }];
    store.set_constraints("ana", &cs).unwrap();
    assert_eq!(store.constraints("ana").unwrap(), cs);
}

#[test]
fn enrichment_is_layered_over_raw_events() {
    let dir = tempfile::tempdir().unwrap();
    let engine = pfm_core::api::Engine::open(dir.path(), fixture_config()).unwrap();
    let posted = engine
        .post_event("ana", pfm_core::chronicle::event_to_value(&meal("m1", "large pizza", "2024-01-01T21:00:00Z")), true)
        .unwrap();
    assert_eq!(posted.enrichment, "ok");
    let raw = engine.store.raw_chronicle("ana").unwrap();
    let Event::Food(f) = raw.get("m1").unwrap() else { panic!() };
    assert!(f.why.nutrition.is_none());
    let Event::Food(f) = engine.chronicle("ana").unwrap().get("m1").cloned().unwrap() else { panic!() };
    // serving size when no quantity was logged: 300 g at 266 kcal / 100 g
    assert!((f.why.nutrition.unwrap().kcal - 798.0).abs() < 1e-9);
    assert!(f.why.taste.is_some());
}

#[test]
fn jsonl_round_trip_is_lossless() {
    let text = std::fs::read_to_string(repo_root().join("fixtures/scenario.jsonl")).unwrap();
    let c = import_jsonl(text.as_bytes()).unwrap();
    let mut out = Vec::new();
    export_jsonl(&c, &mut out).unwrap();
    let back = import_jsonl(out.as_slice()).unwrap();
    assert_eq!(back.events(), c.events());
    let mut again = Vec::new();
    export_jsonl(&back, &mut again).unwrap();
    assert_eq!(out, again);
}
