mod common;

use std::sync::Mutex;

use common::e2e;
use confmeta::pipeline::PipelineError;
use confmeta::store::{Stage, Store};

#[test]
fn offline_run_matches_golden() {
    let tmp = tempfile::tempdir().unwrap();
    let p = e2e::pipeline(tmp.path());
    let store = Mutex::new(Store::open(tmp.path()).unwrap());
    let job = e2e::to_review(&p, &store);
    assert_eq!(job.stage, Stage::Review);
    assert_eq!(e2e::auto_approve_grounded(&p, &store), 5);
    let batch = p.export(&store, &job.id, e2e::now()).unwrap();
    if std::env::var_os("CONFMETA_BLESS").is_some() {
        std::fs::write(e2e::golden(), &batch.text).unwrap();
    }
    let golden = std::fs::read_to_string(e2e::golden()).unwrap();
    assert_eq!(batch.text, golden);
}

#[test]
fn review_gate_and_stage_order() {
    let tmp = tempfile::tempdir().unwrap();
    let p = e2e::pipeline(tmp.path());
    let store = Mutex::new(Store::open(tmp.path()).unwrap());
    let job = e2e::to_review(&p, &store);

    let err = p.run_stage(&store, &job.id, Stage::Compile, e2e::now()).unwrap_err();
    assert!(matches!(err, PipelineError::StageOrderViolation { .. }), "{err}");
    let err = p.run_stage(&store, &job.id, Stage::Harvest, e2e::now()).unwrap_err();
    assert!(matches!(err, PipelineError::StageOrderViolation { .. }), "{err}");
    let err = p.run_stage(&store, &job.id, Stage::Review, e2e::now()).unwrap_err();
    assert!(matches!(err, PipelineError::ReviewPending { remaining: 5 }), "{err}");

    let job = store.lock().unwrap().state().jobs[&job.id].clone();
    assert_eq!(job.stage, Stage::Review);
    assert_eq!(job.error.as_deref(), Some("5 records need review"));
    assert_eq!(job.counters[&Stage::Extract]["records_deadlines"], 5);
    assert_eq!(job.counters[&Stage::Harvest]["papers"], 2);
}
