mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::e2e;

fn confmeta(store: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_confmeta"))
        .arg("--config")
        .arg(e2e::config_path())
        .arg("--store")
        .arg(store)
        .args(["--now", "2024-12-01T00:00:00Z"])
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn lines(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn file_mode_verbs_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let store = tmp.path().join("store");
    let p = |name: &str| tmp.path().join(name);
    let s = |name: &str| p(name).to_str().unwrap().to_string();

    confmeta(&store, &["harvest-web", e2e::CONFERENCE, "--out", &s("pages.jsonl")]);
    assert_eq!(lines(&p("pages.jsonl")).len(), 4);

    confmeta(&store, &["ingest-frontmatter", e2e::CONFERENCE, "--task", "counts", "--out", &s("chunks.jsonl")]);
    assert!(!lines(&p("chunks.jsonl")).is_empty());

    confmeta(&store, &["extract", "--task", "counts", "--chunks", &s("chunks.jsonl"), "--out", &s("counts.jsonl")]);
    let recs = lines(&p("counts.jsonl"));
    assert_eq!(recs.len(), 3);
    let in_use = recs.iter().find(|r| r["row"]["track"] == "in-use").unwrap();
    assert_eq!(in_use["review_state"], "needs_review");
    assert_eq!(in_use["grounding"]["submitted"], "ungrounded");

    let out = confmeta(
        &store,
        &["reconcile", "--records", &s("counts.jsonl"), "--out", &s("reconciled.jsonl"), "--decisions", &s("decisions.jsonl")],
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("decisions"));
    assert_eq!(lines(&p("reconciled.jsonl")).len(), 3);

    // Pending records are refused; the curated subset compiles.
    let refused = Command::new(env!("CARGO_BIN_EXE_confmeta"))
        .arg("--config")
        .arg(e2e::config_path())
        .args(["compile", "--records", &s("reconciled.jsonl"), "--out", &s("refused.qs")])
        .output()
        .unwrap();
    assert!(!refused.status.success());
    assert!(String::from_utf8_lossy(&refused.stderr).contains("needs_review"));
    let curated: Vec<String> = lines(&p("reconciled.jsonl"))
        .into_iter()
        .filter(|r| r["review_state"] != "needs_review")
        .map(|r| r.to_string())
        .collect();
    assert_eq!(curated.len(), 2);
    std::fs::write(p("curated.jsonl"), curated.join("\n") + "\n").unwrap();

    let out = confmeta(&store, &["compile", "--records", &s("curated.jsonl"), "--out", &s("batch.qs")]);
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(stats["statements"].as_u64().unwrap() >= 2);
    let qs = std::fs::read_to_string(p("batch.qs")).unwrap();
    assert!(qs.lines().all(|l| l.starts_with("Q1000000|")), "{qs}");
    assert!(qs.contains("|P5822|25") && qs.contains("|P5822|30"), "{qs}");

    std::fs::create_dir(p("gold")).unwrap();
    std::fs::write(
        p("gold/counts.csv"),
        "conference_key,track,submitted,accepted,in_text,note\n\
         semconf2024,research,120,30,true,\n\
         semconf2024,resources,40,12,true,\n\
         semconf2024,in-use,,5,true,\n",
    )
    .unwrap();
    confmeta(&store, &["eval", "--pred", &s("counts.jsonl"), "--gold", &s("gold"), "--report", &s("report/scores")]);
    let table = std::fs::read_to_string(p("report/scores.txt")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p("report/scores.json")).unwrap()).unwrap();
    // Six extracted numbers, five in the gold: the in-use submission count is spurious.
    let prf = &json["rows"][0]["series"]["SEMCONF"];
    assert_eq!((prf["tp"].as_u64(), prf["fp"].as_u64(), prf["fn"].as_u64()), (Some(5), Some(1), Some(0)), "{table}");
    let row: Vec<&str> = table.lines().nth(2).unwrap().split('|').map(str::trim).collect();
    assert_eq!(row[1..7], ["counts", "Proceedings Front Matter", "mock", "0.83", "1.00", "0.91"], "{table}");
}

#[test]
fn offline_without_fixtures_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_confmeta"))
        .arg("--config")
        .arg(tmp.path().join("missing.toml"))
        .arg("jobs")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}
