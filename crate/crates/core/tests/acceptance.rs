//! Acceptance criteria, one PASS/FAIL line each. Run with `--nocapture`
//! to see the report; the test fails if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader};
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use common::e2e;
use confmeta::eval::micro_prf;
use confmeta::extract::{self, parse_output, render_prompt, CompletionRequest, Provider, ProviderError, SourceChunk};
use confmeta::model::{EntityRef, Qid};
use confmeta::qs::{parse_value, render_value, validate_batch};
use confmeta::reconcile::{
    normalize_name, reconcile_batch, triage, CandidateMatch, EntityIndex, IndexEntry, Thresholds, Triage,
};
use confmeta::records::{ExtractionRecord, ReviewState, Row, SourceKind, Task};
use confmeta::store::Store;
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use url::Url;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn row(pairs: &[(&str, Option<&str>)]) -> Row {
    pairs.iter().map(|(k, v)| (k.to_string(), v.map(str::to_string))).collect()
}

fn counts(track: &str, submitted: Option<&str>, accepted: &str) -> Row {
    row(&[("track", Some(track)), ("submitted", submitted), ("accepted", Some(accepted))])
}

// Example outputs of the two-shot counts prompt, as printed.
const SHOT_1: &str = "track, submitted, accepted\nresearch, 98, 19\nin-use, 23, 9\nresource, 46, 13\n--- complete ----";
const SHOT_2: &str =
    "track, submitted, accepted\nresearch, 245, 52\nPhD symposium, - , 10\ndemo, - , 17\n--- complete ----";

fn prompt_parse_fidelity() -> Outcome {
    let start = Instant::now();
    let prompt = match render_prompt(Task::Counts, "The research track received 10 submissions.") {
        Ok(p) => p,
        Err(e) => return outcome(false, format!("render failed: {e}")),
    };
    // The shots must be embedded in the rendered prompt exactly as printed.
    let embedded = [SHOT_1, SHOT_2].iter().all(|s| prompt.human.contains(s));
    let want1 = vec![
        counts("research", Some("98"), "19"),
        counts("in-use", Some("23"), "9"),
        counts("resource", Some("46"), "13"),
    ];
    let want2 = vec![
        counts("research", Some("245"), "52"),
        counts("PhD symposium", None, "10"),
        counts("demo", None, "17"),
    ];
    let got1 = parse_output(SHOT_1, Task::Counts);
    let got2 = parse_output(SHOT_2, Task::Counts);
    let elapsed = start.elapsed();
    let pass = embedded
        && got1.as_ref().ok() == Some(&want1)
        && got2.as_ref().ok() == Some(&want2)
        && prompt.shot_count == 2
        && elapsed < Duration::from_secs(1);
    outcome(pass, format!("shots embedded={embedded}, parse1={:?}, parse2={:?}, {elapsed:?}", got1.is_ok(), got2.is_ok()))
}

const ESWC_2020: &str = "The main scientific program of ESWC 2020 contained 39 papers: 26 papers in the research track, 8 papers in the resources track, and 5 papers in the in-use track. The papers were selected out of 166 paper submissions, with a total acceptance rate of 23.5% (22% for the research track, 26% for the resources track, and 28% for the in-use track).";

struct Canned(&'static str);

impl Provider for Canned {
    fn model(&self) -> &str {
        "canned"
    }
    fn complete(&self, _: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        Ok(self.0.to_string())
    }
}

fn grounding_guard() -> Outcome {
    let start = Instant::now();
    let chunk = SourceChunk {
        conference_key: "eswc2020".into(),
        source_kind: SourceKind::FrontMatter,
        source_url: Url::parse("https://example.org/eswc2020/frontmatter").unwrap(),
        heading: Some("Preface".into()),
        text: ESWC_2020.into(),
        span: None,
    };
    let injected = "track, submitted, accepted\n\
        research, 119, 26\nresources, 31, 8\nin-use, 18, 5\n\
        research, -, 26\nresources, -, 8\nin-use, -, 5\ntotal, 166, 39\n--- complete ----";
    let out = match extract::extract(Task::Counts, &[chunk], &Canned(injected), 1) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("extract failed: {e}")),
    };
    let state = |submitted: Option<&str>, accepted: &str| {
        out.records
            .iter()
            .find(|r| r.cell("submitted") == submitted && r.cell("accepted") == Some(accepted))
            .map(|r| r.review_state)
    };
    let flagged = [("119", "26"), ("31", "8"), ("18", "5")]
        .iter()
        .all(|(s, a)| state(Some(s), a) == Some(ReviewState::NeedsReview));
    let passing = [(None, "26"), (None, "8"), (None, "5"), (Some("166"), "39")]
        .iter()
        .all(|(s, a)| state(*s, a) == Some(ReviewState::AutoOk));
    let elapsed = start.elapsed();
    outcome(
        flagged && passing && out.records.len() == 7 && elapsed < Duration::from_secs(1),
        format!("119/31/18 flagged={flagged}, 26/8/5+166 pass={passing}, {} records, {elapsed:?}", out.records.len()),
    )
}

/// Smallest counts whose precision and recall are exactly the printed
/// two-decimal values.
fn counts_for(p: f64, r: f64) -> (u64, u64, u64) {
    let (pn, rn) = ((p * 100.0).round() as u64, (r * 100.0).round() as u64);
    (1..=1_000_000u64)
        .find(|tp| (tp * (100 - pn)) % pn == 0 && (tp * (100 - rn)) % rn == 0)
        .map(|tp| (tp, tp * (100 - pn) / pn, tp * (100 - rn) / rn))
        .expect("counts exist for two-decimal ratios")
}

fn metric_regression() -> Outcome {
    // (task, model, series, precision, recall, printed F1)
    let rows: [(&str, &str, &str, f64, f64, f64); 16] = [
        ("counts", "gpt-4", "ISWC", 0.92, 0.87, 0.89),
        ("counts", "gpt-4", "ESWC", 0.94, 0.95, 0.95),
        ("counts", "claude-3", "ISWC", 1.00, 0.89, 0.93),
        ("counts", "claude-3", "ESWC", 0.90, 0.97, 0.93),
        ("roles", "gpt-4", "ISWC", 1.00, 1.00, 1.00),
        ("roles", "gpt-4", "ESWC", 1.00, 1.00, 1.00),
        ("roles", "claude-3", "ISWC", 1.00, 0.96, 0.98),
        ("roles", "claude-3", "ESWC", 1.00, 0.92, 0.96),
        ("pc", "gpt-4", "ISWC", 1.00, 1.00, 1.00),
        ("pc", "gpt-4", "ESWC", 1.00, 1.00, 1.00),
        ("pc", "claude-3", "ISWC", 0.98, 1.00, 0.99),
        ("pc", "claude-3", "ESWC", 0.99, 1.00, 0.99),
        ("deadlines", "gpt-4", "ISWC", 0.80, 0.97, 0.88),
        ("deadlines", "gpt-4", "ESWC", 0.81, 0.94, 0.87),
        ("deadlines", "claude-3", "ISWC", 0.28, 0.92, 0.43),
        ("deadlines", "claude-3", "ESWC", 0.07, 0.81, 0.13),
    ];
    let mut failures = Vec::new();
    for (task, model, series, p, r, f1) in rows {
        let (tp, fp, fn_) = counts_for(p, r);
        let (gp, gr, gf) = micro_prf(tp, fp, fn_);
        assert!((gp - p).abs() < 1e-9 && (gr - r).abs() < 1e-9, "counts reproduce printed p/r");
        let ok = (gf - f1).abs() <= 0.005;
        println!(
            "    {} {task:<9} {model:<8} {series} p={p:.2} r={r:.2} f1={gf:.5} printed={f1:.2} (tp={tp} fp={fp} fn={fn_})",
            if ok { "ok  " } else { "MISS" }
        );
        if !ok {
            failures.push(format!("{task}/{model}/{series} {gf:.4}!={f1}"));
        }
    }
    outcome(failures.is_empty(), format!("{}/16 within 0.005; misses: {}", 16 - failures.len(), failures.join(", ")))
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let p = e2e::pipeline(tmp.path());
    if !p.config.offline {
        return outcome(false, "fixture config is not offline");
    }
    let store = Mutex::new(Store::open(tmp.path()).unwrap());
    let job = e2e::to_review(&p, &store);
    let decided = e2e::auto_approve_grounded(&p, &store);
    let batch = match p.export(&store, &job.id, e2e::now()) {
        Ok(b) => b,
        Err(e) => return outcome(false, format!("export failed: {e}")),
    };
    let elapsed = start.elapsed();
    let golden = std::fs::read_to_string(e2e::golden()).unwrap_or_default();
    let identical = batch.text == golden;
    let has = |main: &str, quals: &[&str]| {
        batch.text.lines().any(|l| {
            let f: Vec<&str> = l.split('|').collect();
            f.get(1) == Some(&main) && quals.iter().all(|q| f.iter().skip(3).step_by(2).any(|x| x == q))
        })
    };
    let patterns = [
        ("P5804", &["P518", "P3831"][..]),
        ("P793", &["P585"][..]),
        ("P859", &["P3831"][..]),
        ("P1346", &["P3831"][..]),
        ("P5822", &["P518"][..]),
    ];
    let missing: Vec<&str> = patterns.iter().filter(|(m, q)| !has(m, q)).map(|(m, _)| *m).collect();
    let violations = validate_batch(&batch.text, p.vocabulary()).violations.len();
    outcome(
        identical && missing.is_empty() && violations == 0 && elapsed < Duration::from_secs(30),
        format!(
            "byte-identical={identical}, {} lines, {decided} curated, missing patterns={missing:?}, violations={violations}, {elapsed:?}",
            batch.text.lines().count()
        ),
    )
}

fn qs_roundtrip() -> Outcome {
    let mut runner = TestRunner::new(PropConfig { cases: 1000, failure_persistence: None, ..PropConfig::default() });
    let n = std::sync::atomic::AtomicUsize::new(0);
    let result = runner.run(&common::value(), |v| {
        n.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        prop_assert_eq!(parse_value(&render_value(&v), v.kind()).unwrap(), v);
        Ok(())
    });
    let n = n.into_inner();
    outcome(result.is_ok() && n >= 1000, format!("{n} values, {:?}", result.err().map(|e| e.to_string())))
}

fn pc_record(name: &str, conference: &str, orcid: Option<&str>) -> ExtractionRecord {
    let mut r = row(&[("name", Some(name)), ("track", Some("research")), ("role", Some("PC"))]);
    if let Some(o) = orcid {
        r.insert("orcid".into(), Some(o.into()));
    }
    ExtractionRecord::new(Task::PcMembers, conference, SourceKind::FrontMatter, Url::parse("https://example.org/fm").unwrap(), r)
}

fn triage_rank(t: &Triage) -> u8 {
    match t {
        Triage::New => 0,
        Triage::Review => 1,
        Triage::Auto(_) => 2,
    }
}

fn reconciler() -> Outcome {
    let now = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
    let names = ["Ada Lovelace", "A. Lovelace", "Alan Turing", "Grace Hopper", "grace  hopper"];
    let confs = ["semconf2023", "semconf2024"];
    let orcids = ["0000-0002-1825-0097", "0000-0001-5109-3700"];
    let index = EntityIndex::from_entries(vec![IndexEntry {
        qid: Qid::new(7001).unwrap(),
        labels: vec!["Alan Turing".into()],
        aliases: vec![],
        orcid: None,
        dblp: None,
        doi: None,
        kind: None,
    }]);

    // Records naming the same person at the same event, without
    // conflicting ids, never end up as two different new entities.
    let batch = proptest::collection::vec((0..names.len(), 0..confs.len(), proptest::option::of(0..orcids.len())), 1..12);
    let mut runner = TestRunner::new(PropConfig { cases: 256, failure_persistence: None, ..PropConfig::default() });
    let dup = runner.run(&batch, |spec| {
        let mut recs: Vec<ExtractionRecord> = spec
            .iter()
            .map(|&(n, c, o)| pc_record(names[n], confs[c], o.map(|i| orcids[i])))
            .collect();
        recs.sort_by(|a, b| a.id.cmp(&b.id));
        recs.dedup_by(|a, b| a.id == b.id);
        reconcile_batch(&mut recs, &index, Thresholds::default(), now).unwrap();
        for a in &recs {
            for b in &recs {
                let same = normalize_name(a.cell("name").unwrap()) == normalize_name(b.cell("name").unwrap())
                    && a.conference_key == b.conference_key
                    && a.cell("orcid") == b.cell("orcid");
                let settled = |r: &ExtractionRecord| r.review_state != ReviewState::NeedsReview;
                if same && settled(a) && settled(b) {
                    prop_assert_eq!(&a.entity, &b.entity, "{} / {}", a.id, b.id);
                }
                if let (Some(EntityRef::Placeholder(x)), Some(EntityRef::Placeholder(y))) = (&a.entity, &b.entity) {
                    if x == y {
                        prop_assert_eq!(normalize_name(a.cell("name").unwrap()), normalize_name(b.cell("name").unwrap()));
                    }
                }
            }
        }
        Ok(())
    });

    // A higher top score never moves a decision toward "new".
    let cand = |q: u64, score: f64| CandidateMatch {
        record_id: "r".into(),
        candidate: Qid::new(q).unwrap().into(),
        label: String::new(),
        score,
        evidence: vec![],
    };
    let scores = (0.0f64..=1.0, 0.0f64..=1.0, proptest::option::of(0.0f64..=1.0));
    let mono = runner.run(&scores, |(a, b, second)| {
        let (lo, hi) = (a.min(b), a.max(b));
        let with = |top: f64| {
            let mut v = vec![cand(1, top)];
            if let Some(s) = second.filter(|s| *s <= lo) {
                v.push(cand(2, s));
            }
            triage(&v, Thresholds::default())
        };
        prop_assert!(triage_rank(&with(lo)) <= triage_rank(&with(hi)));
        Ok(())
    });

    // Two index entries share the name "J. Smith" and differ by ORCID.
    let smiths = EntityIndex::from_entries(
        [(3000003u64, "0000-0001-5109-3700"), (3000004, "0000-0003-1419-2405")]
            .into_iter()
            .map(|(q, orcid)| IndexEntry {
                qid: Qid::new(q).unwrap(),
                labels: vec!["J. Smith".into()],
                aliases: vec![],
                orcid: Some(orcid.into()),
                dblp: None,
                doi: None,
                kind: None,
            })
            .collect(),
    );
    let mut recs = vec![pc_record("J. Smith", "semconf2024", None)];
    let out = reconcile_batch(&mut recs, &smiths, Thresholds::default(), now).unwrap();
    let smith = recs[0].review_state == ReviewState::NeedsReview
        && recs[0].entity.is_none()
        && recs[0].candidates.len() == 2
        && out.review == vec![recs[0].id.clone()];

    outcome(
        dup.is_ok() && mono.is_ok() && smith,
        format!(
            "duplicate prevention={}, triage monotonic={}, J. Smith to review={smith}",
            dup.as_ref().map_or_else(|e| e.to_string(), |_| "ok".into()),
            mono.as_ref().map_or_else(|e| e.to_string(), |_| "ok".into()),
        ),
    )
}

/// Runs the CLI up to the review gate, optionally killing it after the
/// `kill_after`-th completed stage and resuming; returns the final hash.
fn cli_run(store: &std::path::Path, kill_after: Option<usize>) -> Result<String, String> {
    let spawn = |pause: u64| {
        Command::new(env!("CARGO_BIN_EXE_confmeta"))
            .args(["--config", e2e::config_path().to_str().unwrap(), "--store", store.to_str().unwrap()])
            .args(["--now", "2024-12-01T00:00:00Z", "run", e2e::CONFERENCE, "--until", "review"])
            .args(["--pause-ms", &pause.to_string()])
            .env("RUST_LOG", "error")
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| e.to_string())
    };
    if let Some(k) = kill_after {
        let mut child = spawn(1_000)?;
        let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
        for _ in 0..k {
            let line = lines.next().ok_or("run ended early")?.map_err(|e| e.to_string())?;
            if !line.starts_with("stage ") {
                return Err(format!("unexpected output {line:?}"));
            }
        }
        child.kill().map_err(|e| e.to_string())?;
        child.wait().map_err(|e| e.to_string())?;
    }
    let out = spawn(0)?.wait_with_output().map_err(|e| e.to_string())?;
    let text = String::from_utf8_lossy(&out.stdout);
    let last = text.lines().last().ok_or("no output")?;
    last.split("state_hash=").nth(1).map(str::to_string).ok_or_else(|| format!("no hash in {last:?}"))
}

fn crash_safety() -> Outcome {
    let reference = tempfile::tempdir().unwrap();
    let expected = match cli_run(reference.path(), None) {
        Ok(h) => h,
        Err(e) => return outcome(false, format!("reference run failed: {e}")),
    };
    let mut details = Vec::new();
    let mut pass = true;
    for k in 1..=3 {
        let dir = tempfile::tempdir().unwrap();
        let got = cli_run(dir.path(), Some(k));
        let ok = got.as_deref() == Ok(expected.as_str());
        pass &= ok;
        details.push(format!("kill after stage {k}: {}", if ok { "same hash".to_string() } else { format!("{got:?}") }));
    }

    // Curator decisions survive an unclean shutdown.
    let dir = tempfile::tempdir().unwrap();
    let p = e2e::pipeline(dir.path());
    let store = Mutex::new(Store::open(dir.path()).unwrap());
    e2e::to_review(&p, &store);
    e2e::auto_approve_grounded(&p, &store);
    let before = store.lock().unwrap().state_hash();
    let approved: BTreeSet<String> = store
        .lock()
        .unwrap()
        .state()
        .records
        .values()
        .filter(|r| r.review_state == ReviewState::Approved)
        .map(|r| r.id.clone())
        .collect();
    drop(store);
    let reopened = Store::open(dir.path()).unwrap();
    let kept = reopened.state_hash() == before && !approved.is_empty();
    pass &= kept;
    details.push(format!("{} approvals replayed={kept}", approved.len()));
    outcome(pass, details.join("; "))
}

#[test]
fn acceptance_criteria() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: Vec<Criterion> = vec![
        ("prompt/parse fidelity", prompt_parse_fidelity),
        ("grounding guard", grounding_guard),
        ("metric regression", metric_regression),
        ("end-to-end offline run", end_to_end),
        ("QS round-trip", qs_roundtrip),
        ("reconciler invariants", reconciler),
        ("crash safety", crash_safety),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let o = check();
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
