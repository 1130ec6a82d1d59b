//! Micro precision/recall/F1 of extracted records against hand-built gold
//! data, where facts absent from the source text are never counted missing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::extract::parse_date;
use crate::model::{normalize_label, normalize_track};
use crate::reconcile::normalize_name;
use crate::records::{ExtractionRecord, Row, SourceKind, Task};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("expected {expected} items, got {found}")]
    TaskMismatch { expected: Task, found: Task },
    #[error("{file}:{line}: {message}")]
    Gold { file: String, line: usize, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldItem {
    pub task: Task,
    pub conference_key: String,
    pub fields: Row,
    pub in_text: bool,
    pub note: Option<String>,
}

/// Scores for one comparison; the denominator-zero convention gives 1.0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn micro_prf(tp: u64, fp: u64, fn_: u64) -> (f64, f64, f64) {
    let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

impl Prf {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let (precision, recall, f1) = micro_prf(tp, fp, fn_);
        Prf { tp, fp, fn_, precision, recall, f1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AlignOptions {
    /// Count a track's (submitted, accepted) as one item instead of two.
    pub counts_as_pair: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Tp,
    Fp,
    Fn,
    /// Gold fact not stated in the source and not extracted.
    NotInText,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignDetail {
    pub conference_key: String,
    pub key: Vec<String>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Alignment {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub details: Vec<AlignDetail>,
}

fn cell<'a>(row: &'a Row, col: &str) -> &'a str {
    row.get(col).and_then(|c| c.as_deref()).map(str::trim).unwrap_or("")
}

fn digits(s: &str) -> String {
    s.chars().filter(char::is_ascii_digit).collect::<String>().trim_start_matches('0').to_string()
}

fn date_key(s: &str) -> String {
    parse_date(s).map(|d| d.to_string()).unwrap_or_else(|| s.to_string())
}

/// Alignment keys of one row; counts rows yield one item per number.
pub fn item_keys(task: Task, row: &Row, opts: AlignOptions) -> Vec<Vec<String>> {
    let c = |col: &str| cell(row, col);
    match task {
        Task::Counts => {
            let track = normalize_track(c("track"));
            let (s, a) = (c("submitted"), c("accepted"));
            if opts.counts_as_pair {
                if s.is_empty() && a.is_empty() {
                    return vec![];
                }
                return vec![vec![track, digits(s), digits(a)]];
            }
            [("submitted", s), ("accepted", a)]
                .into_iter()
                .filter(|(_, v)| !v.is_empty())
                .map(|(f, v)| vec![track.clone(), f.to_string(), digits(v)])
                .collect()
        }
        Task::Roles => vec![vec![normalize_name(c("name")), normalize_label(c("role"))]],
        Task::PcMembers => vec![vec![normalize_name(c("name")), normalize_track(c("track")), c("role").to_uppercase()]],
        Task::Deadlines => vec![vec![normalize_label(c("kind")), date_key(c("date"))]],
        Task::Sponsors => vec![vec![normalize_name(c("name")), normalize_label(c("level"))]],
        Task::Awards => vec![vec![normalize_name(c("name")), normalize_label(c("award"))]],
        Task::Papers => vec![vec![c("doi").to_uppercase()]],
        Task::Authorships => vec![vec![c("paper_iri").to_string(), digits(c("ordinal")), normalize_name(c("name"))]],
    }
}

#[derive(Default)]
struct Slot {
    extracted: u64,
    in_text: u64,
    not_in_text: u64,
}

/// Multiset matching on the task key tuple, per conference.
pub fn align(extracted: &[ExtractionRecord], gold: &[GoldItem], task: Task, opts: AlignOptions) -> Result<Alignment, EvalError> {
    let mut slots: BTreeMap<(String, Vec<String>), Slot> = BTreeMap::new();
    for r in extracted {
        if r.task != task {
            return Err(EvalError::TaskMismatch { expected: task, found: r.task });
        }
        for key in item_keys(task, &r.row, opts) {
            slots.entry((r.conference_key.clone(), key)).or_default().extracted += 1;
        }
    }
    for g in gold {
        if g.task != task {
            return Err(EvalError::TaskMismatch { expected: task, found: g.task });
        }
        for key in item_keys(task, &g.fields, opts) {
            let slot = slots.entry((g.conference_key.clone(), key)).or_default();
            if g.in_text {
                slot.in_text += 1;
            } else {
                slot.not_in_text += 1;
            }
        }
    }
    let mut out = Alignment::default();
    for ((conference_key, key), s) in slots {
        let matched = s.extracted.min(s.in_text + s.not_in_text);
        let missed = s.in_text.saturating_sub(s.extracted);
        let spurious = s.extracted - matched;
        let unextracted_absent = (s.in_text + s.not_in_text - matched) - missed;
        out.tp += matched;
        out.fp += spurious;
        out.fn_ += missed;
        let mut push = |n: u64, verdict| {
            for _ in 0..n {
                out.details.push(AlignDetail { conference_key: conference_key.clone(), key: key.clone(), verdict });
            }
        };
        push(matched, Verdict::Tp);
        push(spurious, Verdict::Fp);
        push(missed, Verdict::Fn);
        push(unextracted_absent, Verdict::NotInText);
    }
    Ok(out)
}

/// Conference series of a key such as `iswc2023`: its leading letters.
pub fn series_of(conference_key: &str) -> String {
    let s: String = conference_key.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
    if s.is_empty() { conference_key.to_uppercase() } else { s.to_uppercase() }
}

fn parse_bool(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "y" => Some(true),
        "false" | "no" | "0" | "n" => Some(false),
        _ => None,
    }
}

fn key_columns(task: Task) -> &'static [&'static str] {
    match task {
        Task::Counts => &["track"],
        Task::Roles => &["name", "role"],
        Task::PcMembers => &["name", "role"],
        Task::Deadlines => &["kind", "date"],
        Task::Sponsors => &["name"],
        Task::Awards => &["name", "award"],
        Task::Papers => &["doi"],
        Task::Authorships => &["paper_iri", "name", "ordinal"],
    }
}

/// Reads one task's gold CSV: `conference_key`, the task columns,
/// `in_text` and an optional `note` (required when `in_text` is false).
pub fn read_gold(task: Task, input: impl std::io::Read, file: &str) -> Result<Vec<GoldItem>, EvalError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let err = |line: usize, message: String| EvalError::Gold { file: file.to_string(), line, message };
    for required in ["conference_key", "in_text"].iter().chain(task.columns()) {
        if !headers.iter().any(|h| h == *required) {
            return Err(err(1, format!("missing column {required}")));
        }
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let get = |col: &str| headers.iter().position(|h| h == col).and_then(|p| rec.get(p)).unwrap_or("");
        let conference_key = get("conference_key").to_string();
        if conference_key.is_empty() {
            return Err(err(line, "empty conference_key".into()));
        }
        let in_text = parse_bool(get("in_text")).ok_or_else(|| err(line, format!("bad in_text {:?}", get("in_text"))))?;
        let note = Some(get("note").to_string()).filter(|n| !n.is_empty());
        if !in_text && note.is_none() {
            return Err(err(line, "in_text=false needs a note".into()));
        }
        let fields: Row = task
            .columns()
            .iter()
            .map(|c| (c.to_string(), Some(get(c).to_string()).filter(|v| !v.is_empty())))
            .collect();
        if let Some(k) = key_columns(task).iter().find(|k| fields[**k].is_none()) {
            return Err(err(line, format!("empty key field {k}")));
        }
        out.push(GoldItem { task, conference_key, fields, in_text, note });
    }
    Ok(out)
}

/// Every `<task>.csv` present in `dir`.
pub fn load_gold_dir(dir: &Path) -> Result<Vec<GoldItem>, EvalError> {
    let mut out = Vec::new();
    for task in Task::ALL {
        let path = dir.join(format!("{}.csv", task.as_str()));
        if path.exists() {
            let file = std::fs::File::open(&path)?;
            out.extend(read_gold(task, file, &path.display().to_string())?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub task: Task,
    pub source: SourceKind,
    pub model: String,
    /// Scores per conference series.
    pub series: BTreeMap<String, Prf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreReport {
    pub series: Vec<String>,
    pub rows: Vec<ScoreRow>,
}

/// Scores every (task, source, model) present in `predictions`, per
/// conference series, against the gold items of that task.
pub fn evaluate(predictions: &[ExtractionRecord], gold: &[GoldItem], opts: AlignOptions) -> Result<ScoreReport, EvalError> {
    let mut groups: BTreeMap<(Task, SourceKind, String), Vec<&ExtractionRecord>> = BTreeMap::new();
    for r in predictions {
        let model = r.model.clone().unwrap_or_else(|| "unknown".into());
        groups.entry((r.task, r.source_kind, model)).or_default().push(r);
    }
    let mut all_series: Vec<String> = predictions
        .iter()
        .map(|r| series_of(&r.conference_key))
        .chain(gold.iter().map(|g| series_of(&g.conference_key)))
        .collect();
    all_series.sort();
    all_series.dedup();

    let mut rows = Vec::new();
    for ((task, source, model), recs) in groups {
        let mut series = BTreeMap::new();
        for s in &all_series {
            let ex: Vec<ExtractionRecord> =
                recs.iter().filter(|r| &series_of(&r.conference_key) == s).map(|r| (*r).clone()).collect();
            let gd: Vec<GoldItem> =
                gold.iter().filter(|g| g.task == task && &series_of(&g.conference_key) == s).cloned().collect();
            if ex.is_empty() && gd.is_empty() {
                continue;
            }
            let a = align(&ex, &gd, task, opts)?;
            series.insert(s.clone(), Prf::from_counts(a.tp, a.fp, a.fn_));
        }
        rows.push(ScoreRow { task, source, model, series });
    }
    Ok(ScoreReport { series: all_series, rows })
}

fn source_label(s: SourceKind) -> &'static str {
    match s {
        SourceKind::FrontMatter => "Proceedings Front Matter",
        SourceKind::Website => "Website",
        SourceKind::Sparql => "SPARQL",
        SourceKind::Manual => "Manual",
    }
}

impl ScoreReport {
    /// Fixed-width table: Task | Source | Model, then precision, recall and
    /// F1 per series to two decimals.
    pub fn to_table(&self) -> String {
        let mut header = vec!["Task".to_string(), "Source".into(), "Model".into()];
        for s in &self.series {
            header.extend([format!("{s} P"), format!("{s} R"), format!("{s} F1")]);
        }
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut cells = vec![r.task.to_string(), source_label(r.source).to_string(), r.model.clone()];
                for s in &self.series {
                    match r.series.get(s) {
                        Some(p) => cells.extend([p.precision, p.recall, p.f1].map(|v| format!("{v:.2}"))),
                        None => cells.extend(["-", "-", "-"].map(String::from)),
                    }
                }
                cells
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|i| body.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
            .collect();
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            format!("| {} |", padded.join(" | "))
        };
        let mut out = String::new();
        let _ = writeln!(out, "{}", line(&header));
        let sep: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        let _ = writeln!(out, "|-{}-|", sep.join("-|-"));
        for r in &body {
            let _ = writeln!(out, "{}", line(r));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::row;
    use url::Url;

    fn rec(task: Task, conf: &str, cells: &[(&str, &str)]) -> ExtractionRecord {
        let r = row(cells.iter().map(|(k, v)| (*k, Some(*v))));
        let mut rec = ExtractionRecord::new(task, conf, SourceKind::Website, Url::parse("https://x.org/").unwrap(), r);
        rec.model = Some("m".into());
        rec
    }

    fn gold(task: Task, conf: &str, cells: &[(&str, &str)], in_text: bool) -> GoldItem {
        GoldItem {
            task,
            conference_key: conf.into(),
            fields: row(cells.iter().map(|(k, v)| (*k, Some(*v)))),
            in_text,
            note: (!in_text).then(|| "not stated".into()),
        }
    }

    #[test]
    fn counts_items_are_per_number() {
        let cells = [("track", "research"), ("submitted", "98"), ("accepted", "19")];
        let a = align(&[rec(Task::Counts, "iswc2023", &cells)], &[gold(Task::Counts, "iswc2023", &cells, true)], Task::Counts, AlignOptions::default()).unwrap();
        assert_eq!((a.tp, a.fp, a.fn_), (2, 0, 0));
        let pair = AlignOptions { counts_as_pair: true };
        let a = align(&[rec(Task::Counts, "iswc2023", &cells)], &[gold(Task::Counts, "iswc2023", &cells, true)], Task::Counts, pair).unwrap();
        assert_eq!((a.tp, a.fp, a.fn_), (1, 0, 0));
    }

    #[test]
    fn not_in_text_never_missed() {
        let g = gold(Task::Deadlines, "eswc2020", &[("kind", "abstract"), ("date", "2020-01-01")], false);
        let a = align(&[], std::slice::from_ref(&g), Task::Deadlines, AlignOptions::default()).unwrap();
        assert_eq!((a.tp, a.fp, a.fn_), (0, 0, 0));
        assert_eq!(a.details[0].verdict, Verdict::NotInText);
        let e = rec(Task::Deadlines, "eswc2020", &[("kind", "abstract"), ("date", "2020-01-01")]);
        let a = align(&[e], &[g], Task::Deadlines, AlignOptions::default()).unwrap();
        assert_eq!((a.tp, a.fp, a.fn_), (1, 0, 0));
    }

    #[test]
    fn miscategorized_deadline_is_fp_and_fn() {
        let e = rec(Task::Deadlines, "iswc2023", &[("kind", "full paper"), ("date", "2023-05-09")]);
        let g = gold(Task::Deadlines, "iswc2023", &[("kind", "poster"), ("date", "2023-05-09")], true);
        let a = align(&[e], &[g], Task::Deadlines, AlignOptions::default()).unwrap();
        assert_eq!((a.tp, a.fp, a.fn_), (0, 1, 1));
    }

    #[test]
    fn task_mismatch() {
        let e = rec(Task::Roles, "x1", &[("name", "A"), ("role", "general chair")]);
        assert!(matches!(align(&[e], &[], Task::Counts, AlignOptions::default()), Err(EvalError::TaskMismatch { .. })));
    }

    #[test]
    fn empty_convention() {
        assert_eq!(micro_prf(0, 0, 0), (1.0, 1.0, 1.0));
        assert_eq!(micro_prf(0, 3, 0).2, 0.0);
    }

    #[test]
    fn gold_csv() {
        let csv = "conference_key,kind,date,in_text,note\niswc2023,abstract,2023-05-02,true,\niswc2023,poster,2023-07-01,false,only on the CFP page\n";
        let g = read_gold(Task::Deadlines, csv.as_bytes(), "deadlines.csv").unwrap();
        assert_eq!(g.len(), 2);
        assert!(!g[1].in_text);
        let bad = "conference_key,kind,date,in_text\niswc2023,poster,2023-07-01,false\n";
        assert!(read_gold(Task::Deadlines, bad.as_bytes(), "d.csv").is_err());
    }

    #[test]
    fn report_layout() {
        let empty = ScoreReport::default().to_table();
        assert_eq!(empty.lines().count(), 2);
        let recs = vec![
            rec(Task::Roles, "iswc2023", &[("name", "A B"), ("role", "general chair")]),
            {
                let mut r = rec(Task::Roles, "iswc2023", &[("name", "A B"), ("role", "general chair")]);
                r.model = Some("n".into());
                r
            },
        ];
        let g = vec![gold(Task::Roles, "iswc2023", &[("name", "A. B"), ("role", "General Chair")], true)];
        let rep = evaluate(&recs, &g, AlignOptions::default()).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert_eq!(rep.rows[0].series["ISWC"].f1, 1.0);
        assert!(rep.to_table().contains("| roles | Website"));
    }
}
