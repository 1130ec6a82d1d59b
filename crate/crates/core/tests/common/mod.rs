#![allow(dead_code)]

use std::path::PathBuf;

use confmeta::model::{EntityRef, Qid, Value, WikiTime};
use proptest::prelude::*;
use rust_decimal::Decimal;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn qid() -> impl Strategy<Value = Qid> {
    (1u64..=999_999_999_999).prop_map(|n| Qid::new(n).unwrap())
}

pub fn wiki_time() -> impl Strategy<Value = WikiTime> {
    prop_oneof![
        (-9999i32..=9999).prop_map(WikiTime::year),
        ((-9999i32..=9999), 1u8..=12).prop_map(|(y, m)| WikiTime::month(y, m).unwrap()),
        (1i32..=9999, 1u32..=12, 1u32..=28)
            .prop_map(|(y, m, d)| WikiTime::day(chrono::NaiveDate::from_ymd_opt(y, m, d).unwrap())),
    ]
}

pub fn text() -> impl Strategy<Value = String> {
    "[^\\p{Cc}]{0,40}"
}

/// Any well-formed value that a batch can carry.
pub fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        qid().prop_map(Value::item),
        (any::<i64>(), 0u32..=8, proptest::option::of(qid())).prop_map(|(m, scale, unit)| {
            Value::quantity(Decimal::new(m, scale), unit.map(EntityRef::from))
        }),
        wiki_time().prop_map(Value::time),
        text().prop_map(|t| Value::string(t).unwrap()),
        ("[a-z]{2,3}(-[a-z0-9]{1,4})?", text()).prop_map(|(l, t)| Value::monolingual(l, t).unwrap()),
        ("[a-z]{1,12}", "(org|com|de)", "[a-z0-9/_.-]{0,24}")
            .prop_map(|(h, tld, p)| Value::url(&format!("https://{h}.{tld}/{p}")).unwrap()),
    ]
}

pub mod e2e {
    use std::path::{Path, PathBuf};
    use std::sync::Mutex;

    use chrono::{DateTime, TimeZone, Utc};
    use confmeta::config::Config;
    use confmeta::curation::{Action, DecisionRequest};
    use confmeta::pipeline::Pipeline;
    use confmeta::records::ReviewState;
    use confmeta::reconcile::Mention;
    use confmeta::store::{Job, Stage, Store};

    pub const CONFERENCE: &str = "semconf2024";

    pub fn dir() -> PathBuf {
        super::fixtures().join("e2e")
    }

    pub fn config_path() -> PathBuf {
        dir().join("confmeta.toml")
    }

    pub fn golden() -> PathBuf {
        dir().join("expected.qs")
    }

    pub fn now() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 12, 1, 0, 0, 0).unwrap()
    }

    pub fn pipeline(store_dir: &Path) -> Pipeline {
        let mut config = Config::load(&config_path()).unwrap();
        config.store_dir = store_dir.to_path_buf();
        Pipeline::new(config).unwrap()
    }

    /// Runs a fresh job up to the review gate.
    pub fn to_review(p: &Pipeline, store: &Mutex<Store>) -> Job {
        let job = p.create_job(store, CONFERENCE, now()).unwrap();
        p.run_until(store, &job.id, Stage::Review, now()).unwrap()
    }

    /// The offline run's curation rule: grounded records are approved
    /// (ambiguous entities linked to the top candidate), the rest rejected.
    pub fn auto_approve_grounded(p: &Pipeline, store: &Mutex<Store>) -> usize {
        let pending: Vec<_> = store
            .lock()
            .unwrap()
            .state()
            .records_of(CONFERENCE)
            .filter(|r| r.review_state == ReviewState::NeedsReview)
            .cloned()
            .collect();
        for r in &pending {
            let mut req = DecisionRequest { action: Action::Approve, version: Some(r.version), row: None, candidate: None };
            if r.has_ungrounded() {
                req.action = Action::Reject;
            } else if r.entity.is_none() && Mention::of_record(r).is_some() {
                req.action = Action::Link;
                req.candidate = Some(r.candidates[0].candidate.to_string());
            }
            p.decide(store, &r.id, &req, "e2e", now()).unwrap();
        }
        pending.len()
    }
}
