//! Query templates against DBLP- and ScholarlyData-shaped SPARQL endpoints
//! and decoding of their results into papers, author signatures and
//! sub-events.

mod endpoint;
mod results;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use url::Url;

pub use endpoint::{replay_key, Endpoint, HttpEndpoint, RecordingEndpoint, ReplayEndpoint};
pub use results::{decode, get, ResultSet, Solution, Term, TermKind};

use crate::model::Qid;
use crate::records::{row, ExtractionRecord, SourceKind, Task};

pub const PAGE_SIZE: usize = 1000;
pub const DOI_PREFIX: &str = "https://doi.org/";
pub const SCHOLAR_PREFIX: &str = "https://scholar.google.com/";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SparqlError {
    #[error("endpoint {endpoint} unreachable: {reason}")]
    EndpointUnreachable { endpoint: String, reason: String },
    #[error("malformed results: {0}")]
    MalformedResults(String),
    #[error("placeholder __{name}__: {reason}")]
    UnboundPlaceholder { name: String, reason: String },
    #[error("unknown query template {0}")]
    UnknownTemplate(String),
}

/// Named query templates with `__name__` placeholders.
#[derive(Debug, Clone)]
pub struct Templates {
    texts: BTreeMap<String, String>,
}

impl Default for Templates {
    fn default() -> Self {
        let texts = [
            ("papers", include_str!("../../queries/papers.rq")),
            ("authors", include_str!("../../queries/authors.rq")),
            ("subevents", include_str!("../../queries/subevents.rq")),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        Templates { texts }
    }
}

impl Templates {
    /// Built-in templates, overridden by any `<name>.rq` found in `dir`.
    pub fn with_overrides(dir: &Path) -> std::io::Result<Self> {
        let mut t = Templates::default();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "rq") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    t.texts.insert(stem.to_string(), std::fs::read_to_string(&path)?);
                }
            }
        }
        Ok(t)
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.texts.get(name).map(String::as_str)
    }
}

/// Rejects anything that could break out of `<...>` in a query.
pub fn check_iri(raw: &str) -> Result<(), String> {
    if raw.is_empty() {
        return Err("empty IRI".into());
    }
    if let Some(c) = raw.chars().find(|c| c.is_whitespace() || c.is_control() || "<>\"{}|^`\\".contains(*c)) {
        return Err(format!("character {c:?} not allowed in an IRI"));
    }
    let url = Url::parse(raw).map_err(|e| e.to_string())?;
    if url.cannot_be_a_base() && url.scheme() != "urn" {
        return Err("not a hierarchical IRI".into());
    }
    Ok(())
}

/// Substitutes every `__name__` in `template`; each must be bound to a
/// valid IRI.
pub fn fill(template: &str, bindings: &BTreeMap<String, String>) -> Result<String, SparqlError> {
    let re = Regex::new(r"__([A-Za-z][A-Za-z0-9_]*?)__").expect("static regex");
    for cap in re.captures_iter(template) {
        let name = &cap[1];
        let value = bindings.get(name).ok_or_else(|| SparqlError::UnboundPlaceholder {
            name: name.to_string(),
            reason: "no binding".into(),
        })?;
        check_iri(value).map_err(|reason| SparqlError::UnboundPlaceholder { name: name.to_string(), reason })?;
    }
    Ok(re.replace_all(template, |c: &regex::Captures| bindings[&c[1]].clone()).into_owned())
}

/// The exact text sent for page `page` of a filled query.
pub fn paged(query: &str, page: usize) -> String {
    format!("{}\nLIMIT {PAGE_SIZE}\nOFFSET {}\n", query.trim_end(), page * PAGE_SIZE)
}

/// Runs a template, following LIMIT/OFFSET pages until one comes back short.
pub fn run_query(
    endpoint: &dyn Endpoint,
    templates: &Templates,
    template_name: &str,
    bindings: &BTreeMap<String, String>,
) -> Result<ResultSet, SparqlError> {
    let template = templates.get(template_name).ok_or_else(|| SparqlError::UnknownTemplate(template_name.into()))?;
    let query = fill(template, bindings)?;
    let mut all = ResultSet { vars: Vec::new(), rows: Vec::new() };
    for page in 0.. {
        let rs = decode(&endpoint.query(&paged(&query, page))?)?;
        let n = rs.rows.len();
        if all.vars.is_empty() {
            all.vars = rs.vars;
        }
        all.rows.extend(rs.rows);
        if n < PAGE_SIZE {
            break;
        }
    }
    Ok(all)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub iri: String,
    pub title: String,
    pub doi: String,
    pub pages: String,
    pub year: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonSignature {
    pub paper_iri: String,
    pub name: String,
    pub ordinal: u32,
    pub orcid: Option<String>,
    pub wikidata: Option<Qid>,
    pub scholar: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubEventKind {
    Workshop,
    Tutorial,
    Panel,
    Keynote,
}

impl SubEventKind {
    /// Kind named by an event class IRI's local name.
    pub fn from_class(iri: &str) -> Option<Self> {
        let local = iri.rsplit(['#', '/']).next().unwrap_or(iri).to_ascii_lowercase();
        [
            ("workshop", SubEventKind::Workshop),
            ("tutorial", SubEventKind::Tutorial),
            ("panel", SubEventKind::Panel),
            ("keynote", SubEventKind::Keynote),
        ]
        .into_iter()
        .find(|(k, _)| local.contains(k))
        .map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubEvent {
    pub parent: String,
    pub kind: SubEventKind,
    pub title: String,
    pub iri: String,
}

/// Decoded items plus what was dropped or looks suspicious.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Harvest<T> {
    pub items: Vec<T>,
    pub warnings: Vec<String>,
    /// Papers whose author ordinals are not exactly 1..n.
    pub flagged: Vec<String>,
}

impl<T> Default for Harvest<T> {
    fn default() -> Self {
        Harvest { items: Vec::new(), warnings: Vec::new(), flagged: Vec::new() }
    }
}

fn proceedings(iri: &str) -> BTreeMap<String, String> {
    BTreeMap::from([("proceedings_uri".to_string(), iri.to_string())])
}

pub fn decode_papers(rs: &ResultSet) -> Harvest<PaperRecord> {
    let mut out = Harvest::default();
    let mut seen = HashSet::new();
    for (i, r) in rs.rows.iter().enumerate() {
        let (Some(iri), Some(title), Some(doi), Some(pages), Some(year)) =
            (get(r, "paper"), get(r, "title"), get(r, "doi"), get(r, "pages"), get(r, "year"))
        else {
            out.warnings.push(format!("row {i}: missing a required variable"));
            continue;
        };
        if !doi.starts_with(DOI_PREFIX) {
            out.warnings.push(format!("{iri}: DOI {doi} lacks the {DOI_PREFIX} prefix"));
            continue;
        }
        let Ok(year) = year.trim().parse::<i32>() else {
            out.warnings.push(format!("{iri}: unparseable year {year:?}"));
            continue;
        };
        if seen.insert(iri.clone()) {
            out.items.push(PaperRecord { iri, title, doi, pages, year });
        }
    }
    out
}

fn wikidata_qid(raw: &str) -> Option<Qid> {
    raw.rsplit('/').next()?.parse().ok()
}

pub fn decode_authors(rs: &ResultSet) -> Harvest<PersonSignature> {
    let mut out: Harvest<PersonSignature> = Harvest::default();
    let mut slots: HashSet<(String, u32)> = HashSet::new();
    let mut flagged = BTreeSet::new();
    for (i, r) in rs.rows.iter().enumerate() {
        let (Some(paper_iri), Some(name), Some(ordinal)) = (get(r, "paper"), get(r, "name"), get(r, "ordinal")) else {
            out.warnings.push(format!("row {i}: missing a required variable"));
            continue;
        };
        let ordinal = match ordinal.trim().parse::<u32>() {
            Ok(n) if n > 0 => n,
            _ => {
                out.warnings.push(format!("{paper_iri}: bad ordinal {ordinal:?}"));
                flagged.insert(paper_iri);
                continue;
            }
        };
        if !slots.insert((paper_iri.clone(), ordinal)) {
            // Several optional bindings multiply rows; the same name is a
            // repeat, a different one is a clash.
            let same = out.items.iter().any(|s| s.paper_iri == paper_iri && s.ordinal == ordinal && s.name == name);
            if !same {
                out.warnings.push(format!("{paper_iri}: ordinal {ordinal} used by two authors"));
                flagged.insert(paper_iri);
            }
            continue;
        }
        let wikidata = get(r, "wikidata").and_then(|w| {
            let q = wikidata_qid(&w);
            if q.is_none() {
                out.warnings.push(format!("{paper_iri}: unparseable wikidata id {w}"));
            }
            q
        });
        let scholar = get(r, "scholar").filter(|s| s.starts_with(SCHOLAR_PREFIX));
        out.items.push(PersonSignature { paper_iri, name, ordinal, orcid: get(r, "orcid"), wikidata, scholar });
    }
    let mut per_paper: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for s in &out.items {
        per_paper.entry(&s.paper_iri).or_default().push(s.ordinal);
    }
    for (paper, mut ords) in per_paper {
        ords.sort_unstable();
        if ords.iter().enumerate().any(|(i, &o)| o as usize != i + 1) {
            flagged.insert(paper.to_string());
        }
    }
    out.flagged = flagged.into_iter().collect();
    out
}

pub fn decode_subevents(parent: &str, rs: &ResultSet) -> Harvest<SubEvent> {
    let mut out = Harvest::default();
    let mut order: Vec<String> = Vec::new();
    let mut kinds: BTreeMap<String, BTreeSet<SubEventKind>> = BTreeMap::new();
    let mut titles: BTreeMap<String, String> = BTreeMap::new();
    for r in &rs.rows {
        let Some(iri) = get(r, "event") else { continue };
        if !kinds.contains_key(&iri) {
            order.push(iri.clone());
        }
        let entry = kinds.entry(iri.clone()).or_default();
        if let Some(kind) = get(r, "type").as_deref().and_then(SubEventKind::from_class) {
            entry.insert(kind);
        }
        if let Some(t) = get(r, "name").or_else(|| get(r, "label")) {
            titles.entry(iri).or_insert(t);
        }
    }
    for iri in order {
        match kinds[&iri].iter().next() {
            Some(&kind) => out.items.push(SubEvent {
                parent: parent.to_string(),
                kind,
                title: titles.get(&iri).cloned().unwrap_or_default(),
                iri,
            }),
            None => out.warnings.push(format!("{iri}: no known event kind, skipped")),
        }
    }
    out
}

pub fn papers_of_proceedings(
    endpoint: &dyn Endpoint,
    templates: &Templates,
    proceedings_iri: &str,
) -> Result<Harvest<PaperRecord>, SparqlError> {
    Ok(decode_papers(&run_query(endpoint, templates, "papers", &proceedings(proceedings_iri))?))
}

pub fn authors_of_proceedings(
    endpoint: &dyn Endpoint,
    templates: &Templates,
    proceedings_iri: &str,
) -> Result<Harvest<PersonSignature>, SparqlError> {
    Ok(decode_authors(&run_query(endpoint, templates, "authors", &proceedings(proceedings_iri))?))
}

pub fn subevents_of_conference(
    endpoint: &dyn Endpoint,
    templates: &Templates,
    conference_iri: &str,
) -> Result<Harvest<SubEvent>, SparqlError> {
    let bindings = BTreeMap::from([("conference_uri".to_string(), conference_iri.to_string())]);
    Ok(decode_subevents(conference_iri, &run_query(endpoint, templates, "subevents", &bindings)?))
}

fn source_url(iri: &str, fallback: &Url) -> Url {
    Url::parse(iri).unwrap_or_else(|_| fallback.clone())
}

/// `papers` task records, one per paper.
pub fn paper_records(conference_key: &str, fallback_url: &Url, papers: &[PaperRecord]) -> Vec<ExtractionRecord> {
    papers
        .iter()
        .map(|p| {
            let year = p.year.to_string();
            let r = row([
                ("iri", Some(p.iri.as_str())),
                ("title", Some(p.title.as_str())),
                ("doi", Some(p.doi.as_str())),
                ("pages", Some(p.pages.as_str())),
                ("year", Some(year.as_str())),
            ]);
            ExtractionRecord::new(Task::Papers, conference_key, SourceKind::Sparql, source_url(&p.iri, fallback_url), r)
        })
        .collect()
}

/// `authorships` task records, one per signature.
pub fn authorship_records(
    conference_key: &str,
    fallback_url: &Url,
    signatures: &[PersonSignature],
) -> Vec<ExtractionRecord> {
    signatures
        .iter()
        .map(|s| {
            let ordinal = s.ordinal.to_string();
            let wikidata = s.wikidata.map(|q| q.to_string());
            let r = row([
                ("paper_iri", Some(s.paper_iri.as_str())),
                ("name", Some(s.name.as_str())),
                ("ordinal", Some(ordinal.as_str())),
                ("orcid", s.orcid.as_deref()),
                ("wikidata", wikidata.as_deref()),
                ("scholar", s.scholar.as_deref()),
            ]);
            let url = source_url(&s.paper_iri, fallback_url);
            ExtractionRecord::new(Task::Authorships, conference_key, SourceKind::Sparql, url, r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rs(json: &str) -> ResultSet {
        decode(json).unwrap()
    }

    #[test]
    fn fill_guards_iris() {
        let t = Templates::default();
        let mut b = BTreeMap::new();
        assert!(matches!(fill(t.get("papers").unwrap(), &b), Err(SparqlError::UnboundPlaceholder { .. })));
        b.insert("proceedings_uri".into(), "https://dblp.org/rec/conf/x> } DROP ALL {".into());
        assert!(matches!(fill(t.get("papers").unwrap(), &b), Err(SparqlError::UnboundPlaceholder { .. })));
        b.insert("proceedings_uri".into(), "https://dblp.org/rec/conf/semweb/2023-1".into());
        let q = fill(t.get("papers").unwrap(), &b).unwrap();
        assert!(q.contains("dblp:publishedAsPartOf <https://dblp.org/rec/conf/semweb/2023-1> ."));
        assert!(!q.contains("__"));
    }

    #[test]
    fn template_fix_applied() {
        assert!(Templates::default().get("authors").unwrap().contains(r#"STRSTARTS(str(?scholar),"https://scholar.google.com/")"#));
    }

    #[test]
    fn papers_filter_and_dedupe() {
        let body = r#"{"head":{"vars":["paper","title","doi","pages","year"]},"results":{"bindings":[
          {"paper":{"type":"uri","value":"https://dblp.org/rec/a"},"title":{"type":"literal","value":"A"},
           "doi":{"type":"uri","value":"https://doi.org/10.1/a"},"pages":{"type":"literal","value":"1-17"},
           "year":{"type":"literal","datatype":"http://www.w3.org/2001/XMLSchema#gYear","value":"2023"}},
          {"paper":{"type":"uri","value":"https://dblp.org/rec/a"},"title":{"type":"literal","value":"A"},
           "doi":{"type":"uri","value":"https://doi.org/10.1/a"},"pages":{"type":"literal","value":"1-17"},
           "year":{"type":"literal","value":"2023"}},
          {"paper":{"type":"uri","value":"https://dblp.org/rec/b"},"title":{"type":"literal","value":"B"},
           "doi":{"type":"uri","value":"http://example.org/b"},"pages":{"type":"literal","value":"2"},
           "year":{"type":"literal","value":"2023"}}]}}"#;
        let h = decode_papers(&rs(body));
        assert_eq!(h.items.len(), 1);
        assert_eq!(h.items[0].year, 2023);
        assert_eq!(h.warnings.len(), 1);
    }

    #[test]
    fn author_gaps_flagged() {
        let sig = |p: &str, n: &str, o: u32| {
            format!(r#"{{"paper":{{"type":"uri","value":"{p}"}},"name":{{"type":"literal","value":"{n}"}},"ordinal":{{"type":"literal","value":"{o}"}}}}"#)
        };
        let body = format!(
            r#"{{"head":{{"vars":[]}},"results":{{"bindings":[{},{},{},{}]}}}}"#,
            sig("p1", "A", 1),
            sig("p1", "B", 2),
            sig("p2", "C", 1),
            sig("p2", "D", 3)
        );
        let h = decode_authors(&rs(&body));
        assert_eq!(h.items.len(), 4);
        assert_eq!(h.flagged, ["p2"]);
        assert!(h.items.iter().all(|s| s.orcid.is_none() && s.wikidata.is_none() && s.scholar.is_none()));
    }

    #[test]
    fn malformed_bodies() {
        assert!(matches!(decode("<html>"), Err(SparqlError::MalformedResults(_))));
        assert!(matches!(decode(r#"{"head":{}}"#), Err(SparqlError::MalformedResults(_))));
    }

    #[test]
    fn kinds_from_classes() {
        let k = SubEventKind::from_class;
        assert_eq!(k("https://w3id.org/scholarlydata/ontology/conference-ontology.owl#Workshop"), Some(SubEventKind::Workshop));
        assert_eq!(k("http://x.org/KeynoteTalk"), Some(SubEventKind::Keynote));
        assert_eq!(k("http://x.org/SocialEvent"), None);
    }
}
