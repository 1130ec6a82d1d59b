//! Entity reconciliation: candidate generation against a local index,
//! threshold triage, intra-batch unification and decision application.

mod index;
mod similarity;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{EntityRef, Qid};
use crate::records::{ExtractionRecord, ReviewState, Task};

pub use index::{EntityIndex, IndexEntry};
pub use similarity::{normalize_name, trigram_jaccard};

/// Gap the top candidate needs over the runner-up for an automatic link.
pub const AMBIGUITY_GAP: f64 = 0.1;
const EPS: f64 = 1e-9;
/// Below this name similarity a candidate is not reported at all.
pub const MIN_SIMILARITY: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum ReconcileError {
    #[error("entity index unavailable: {0}")]
    IndexUnavailable(String),
    #[error("record {0} is already finalized")]
    RecordFinalized(String),
    #[error("unknown record {0}")]
    UnknownRecord(String),
    #[error("invalid decision: {0}")]
    InvalidDecision(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Person,
    Organization,
    Paper,
    Event,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdKind {
    Wikidata,
    Orcid,
    Dblp,
    Doi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "signal", rename_all = "snake_case")]
pub enum Evidence {
    ExactExternalId { kind: IdKind },
    NameSimilarity { value: f64 },
    TypeMatch,
    ConflictingExternalId { kind: IdKind, ours: String, theirs: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateMatch {
    pub record_id: String,
    pub candidate: EntityRef,
    pub label: String,
    pub score: f64,
    pub evidence: Vec<Evidence>,
}

impl CandidateMatch {
    pub fn has_conflict(&self) -> bool {
        self.evidence.iter().any(|e| matches!(e, Evidence::ConflictingExternalId { .. }))
    }

    fn qid_number(&self) -> u64 {
        self.candidate.qid().map_or(u64::MAX, Qid::number)
    }
}

/// What a record says about the entity it mentions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Mention {
    pub name: String,
    pub kind: Option<EntityKind>,
    pub ids: BTreeMap<IdKind, String>,
}

impl Mention {
    pub fn new(name: impl Into<String>, kind: Option<EntityKind>) -> Self {
        Mention { name: name.into(), kind, ids: BTreeMap::new() }
    }

    pub fn with_id(mut self, kind: IdKind, value: &str) -> Self {
        if let Some(v) = canonical_id(kind, value) {
            self.ids.insert(kind, v);
        }
        self
    }

    /// The mention carried by a record, if its task names an entity.
    pub fn of_record(record: &ExtractionRecord) -> Option<Mention> {
        let (column, kind) = match record.task {
            Task::Roles | Task::PcMembers | Task::Authorships => ("name", Some(EntityKind::Person)),
            Task::Awards => ("name", None),
            Task::Sponsors => ("name", Some(EntityKind::Organization)),
            Task::Papers => ("title", Some(EntityKind::Paper)),
            Task::Counts | Task::Deadlines => return None,
        };
        let mut m = Mention::new(record.cell(column)?, kind);
        for (col, id) in [("orcid", IdKind::Orcid), ("wikidata", IdKind::Wikidata), ("dblp", IdKind::Dblp), ("doi", IdKind::Doi)] {
            if let Some(v) = record.cell(col) {
                m = m.with_id(id, v);
            }
        }
        Some(m)
    }
}

/// Reduces an external identifier to its bare comparable form.
pub fn canonical_id(kind: IdKind, raw: &str) -> Option<String> {
    let raw = raw.trim();
    let bare = match kind {
        IdKind::Wikidata => {
            let tail = raw.rsplit('/').next().unwrap_or(raw);
            return tail.parse::<Qid>().ok().map(|q| q.to_string());
        }
        IdKind::Orcid => raw.trim_start_matches("https://orcid.org/").trim_start_matches("http://orcid.org/").to_string(),
        IdKind::Doi => raw
            .trim_start_matches("https://doi.org/")
            .trim_start_matches("http://dx.doi.org/")
            .to_ascii_lowercase(),
        IdKind::Dblp => raw.trim_start_matches("https://dblp.org/pid/").trim_start_matches("https://dblp.org/rec/").to_string(),
    };
    (!bare.is_empty()).then_some(bare)
}

/// Backend able to propose candidates for a mention.
pub trait EntityLookup {
    fn candidates(&self, record_id: &str, mention: &Mention) -> Result<Vec<CandidateMatch>, ReconcileError>;
}

/// Orders candidates by score descending, then QID ascending.
pub fn rank(matches: &mut [CandidateMatch]) {
    matches.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.qid_number().cmp(&b.qid_number())));
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub auto: f64,
    pub review: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { auto: 0.95, review: 0.75 }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), String> {
        let ok = (0.0..=1.0).contains(&self.review) && (0.0..=1.0).contains(&self.auto) && self.auto > self.review;
        if ok { Ok(()) } else { Err(format!("thresholds must satisfy 0 <= review < auto <= 1, got {self:?}")) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Triage {
    Auto(EntityRef),
    Review,
    New,
}

/// Decides from ranked matches. A conflicting external id on the top
/// candidate always goes to review.
pub fn triage(matches: &[CandidateMatch], t: Thresholds) -> Triage {
    let Some(top) = matches.first() else { return Triage::New };
    let gap_ok = matches.get(1).is_none_or(|second| top.score - second.score >= AMBIGUITY_GAP - EPS);
    if top.score >= t.auto && gap_ok && !top.has_conflict() {
        Triage::Auto(top.candidate.clone())
    } else if top.score >= t.review || top.has_conflict() {
        Triage::Review
    } else {
        Triage::New
    }
}

/// Placeholder for a new entity, stable for the same name at the same event.
pub fn new_entity_placeholder(name: &str, conference_key: &str) -> EntityRef {
    let mut h = Sha256::new();
    h.update(normalize_name(name));
    h.update([0x1f]);
    h.update(conference_key);
    let id = format!("new-{}", hex::encode(&h.finalize()[..6]));
    EntityRef::placeholder(id).expect("hex placeholder is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    AutoMatched,
    AutoNew,
    HumanLinked,
    HumanNew,
    HumanRejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconciliationDecision {
    pub record_id: String,
    pub outcome: Outcome,
    #[serde(default)]
    pub target: Option<EntityRef>,
    pub decided_by: String,
    pub decided_at: DateTime<Utc>,
}

impl ReconciliationDecision {
    pub fn new(
        record_id: impl Into<String>,
        outcome: Outcome,
        target: Option<EntityRef>,
        decided_by: impl Into<String>,
        decided_at: DateTime<Utc>,
    ) -> Result<Self, ReconcileError> {
        let valid = match (outcome, &target) {
            (Outcome::AutoMatched | Outcome::HumanLinked, Some(t)) => t.is_resolved(),
            (Outcome::AutoNew, Some(t)) => !t.is_resolved(),
            (Outcome::HumanNew | Outcome::HumanRejected, None) => true,
            _ => false,
        };
        if !valid {
            return Err(ReconcileError::InvalidDecision(format!("{outcome:?} with target {target:?}")));
        }
        Ok(ReconciliationDecision { record_id: record_id.into(), outcome, target, decided_by: decided_by.into(), decided_at })
    }
}

/// Applies a decision to its record. Human outcomes finalize the record.
pub fn apply_decision(record: &mut ExtractionRecord, decision: &ReconciliationDecision) -> Result<(), ReconcileError> {
    if record.id != decision.record_id {
        return Err(ReconcileError::UnknownRecord(decision.record_id.clone()));
    }
    if record.review_state.is_final() {
        return Err(ReconcileError::RecordFinalized(record.id.clone()));
    }
    let placeholder = || {
        let name = Mention::of_record(record).map(|m| m.name).unwrap_or_else(|| record.id.clone());
        new_entity_placeholder(&name, &record.conference_key)
    };
    match decision.outcome {
        Outcome::AutoMatched | Outcome::AutoNew => record.entity = decision.target.clone(),
        Outcome::HumanLinked => {
            record.entity = decision.target.clone();
            record.review_state = ReviewState::Approved;
        }
        Outcome::HumanNew => {
            record.entity = Some(placeholder());
            record.review_state = ReviewState::Approved;
        }
        Outcome::HumanRejected => record.review_state = ReviewState::Rejected,
    }
    record.version += 1;
    Ok(())
}

/// Result of reconciling a batch of records.
#[derive(Debug, Default)]
pub struct BatchOutcome {
    pub decisions: Vec<ReconciliationDecision>,
    pub review: Vec<String>,
}

/// Reconciles every record that mentions an entity and has none yet.
///
/// Records with the same normalized name and kind are unified when they
/// come from the same event or share an external id; a unified group gets
/// one target or one placeholder, and any disagreement sends the whole
/// group to review.
pub fn reconcile_batch(
    records: &mut [ExtractionRecord],
    lookup: &dyn EntityLookup,
    thresholds: Thresholds,
    now: DateTime<Utc>,
) -> Result<BatchOutcome, ReconcileError> {
    let mut pending = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if r.entity.is_some() || r.review_state.is_final() {
            continue;
        }
        if let Some(m) = Mention::of_record(r) {
            let mut c = lookup.candidates(&r.id, &m)?;
            rank(&mut c);
            let t = triage(&c, thresholds);
            pending.push((i, m, c, t));
        }
    }

    let n = pending.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let key = |m: &Mention| (normalize_name(&m.name), m.kind);
    for a in 0..n {
        for b in (a + 1)..n {
            let (ma, mb) = (&pending[a].1, &pending[b].1);
            if key(ma) != key(mb) {
                continue;
            }
            let same_event = records[pending[a].0].conference_key == records[pending[b].0].conference_key;
            let shared = ma.ids.iter().any(|(k, v)| mb.ids.get(k) == Some(v));
            let conflicting = ma.ids.iter().any(|(k, v)| mb.ids.get(k).is_some_and(|w| w != v));
            if shared || (same_event && !conflicting) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }

    struct Plan {
        members: Vec<usize>,
        review: bool,
        target: Option<Qid>,
        placeholder: EntityRef,
    }
    let mut plans: Vec<Plan> = groups
        .into_values()
        .map(|members| {
            let targets: BTreeSet<Qid> = members
                .iter()
                .filter_map(|&i| match &pending[i].3 {
                    Triage::Auto(t) => t.qid(),
                    _ => None,
                })
                .collect();
            let any_review = members.iter().any(|&i| pending[i].3 == Triage::Review);
            let first_conf = members.iter().map(|&i| records[pending[i].0].conference_key.as_str()).min().unwrap_or("");
            Plan {
                review: any_review || targets.len() > 1,
                target: targets.iter().next().copied(),
                placeholder: new_entity_placeholder(&pending[members[0]].1.name, first_conf),
                members,
            }
        })
        .collect();
    // Two groups that would mint the same placeholder are namesakes the
    // index cannot separate.
    let mut minted: BTreeMap<EntityRef, usize> = BTreeMap::new();
    for p in plans.iter().filter(|p| !p.review && p.target.is_none()) {
        *minted.entry(p.placeholder.clone()).or_default() += 1;
    }
    for p in plans.iter_mut() {
        if !p.review && p.target.is_none() && minted[&p.placeholder] > 1 {
            p.review = true;
        }
    }

    let mut out = BatchOutcome::default();
    for plan in plans {
        for &i in &plan.members {
            let (ri, _, ref cands, _) = pending[i];
            let record = &mut records[ri];
            record.candidates = cands.clone();
            if plan.review {
                record.review_state = ReviewState::NeedsReview;
                record.version += 1;
                out.review.push(record.id.clone());
                continue;
            }
            let decision = match plan.target {
                Some(q) => ReconciliationDecision::new(&record.id, Outcome::AutoMatched, Some(q.into()), "reconciler", now)?,
                None => ReconciliationDecision::new(
                    &record.id,
                    Outcome::AutoNew,
                    Some(plan.placeholder.clone()),
                    "reconciler",
                    now,
                )?,
            };
            apply_decision(record, &decision)?;
            out.decisions.push(decision);
        }
    }
    out.review.sort();
    out.decisions.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(q: u64, score: f64) -> CandidateMatch {
        CandidateMatch {
            record_id: "r".into(),
            candidate: Qid::new(q).unwrap().into(),
            label: String::new(),
            score,
            evidence: vec![],
        }
    }

    #[test]
    fn triage_examples() {
        let t = Thresholds::default();
        assert!(matches!(triage(&[cm(1, 1.0)], t), Triage::Auto(_)));
        assert_eq!(triage(&[cm(1, 0.97), cm(2, 0.96)], t), Triage::Review);
        assert_eq!(triage(&[cm(1, 0.50)], t), Triage::New);
        assert_eq!(triage(&[], t), Triage::New);
        assert_eq!(triage(&[cm(1, 0.80)], t), Triage::Review);
        assert!(matches!(triage(&[cm(1, 1.0), cm(2, 0.9)], t), Triage::Auto(_)));
    }

    #[test]
    fn ranking_breaks_ties_by_qid() {
        let mut v = vec![cm(30, 0.9), cm(4, 0.9), cm(7, 0.95)];
        rank(&mut v);
        let order: Vec<_> = v.iter().map(|c| c.qid_number()).collect();
        assert_eq!(order, [7, 4, 30]);
    }

    #[test]
    fn placeholder_is_stable() {
        let a = new_entity_placeholder("Irène  Celino", "iswc2023");
        let b = new_entity_placeholder("irene celino", "iswc2023");
        assert_eq!(a, b);
        assert_ne!(a, new_entity_placeholder("irene celino", "iswc2022"));
    }

    #[test]
    fn decision_target_invariant() {
        let now = Utc::now();
        assert!(ReconciliationDecision::new("r", Outcome::HumanLinked, None, "u", now).is_err());
        assert!(ReconciliationDecision::new("r", Outcome::HumanNew, Some(Qid::new(1).unwrap().into()), "u", now).is_err());
        assert!(ReconciliationDecision::new("r", Outcome::HumanLinked, Some(Qid::new(1).unwrap().into()), "u", now).is_ok());
    }

    #[test]
    fn canonical_ids() {
        assert_eq!(canonical_id(IdKind::Orcid, "https://orcid.org/0000-0001-2345-6789").unwrap(), "0000-0001-2345-6789");
        assert_eq!(canonical_id(IdKind::Wikidata, "http://www.wikidata.org/entity/Q42").unwrap(), "Q42");
        assert_eq!(canonical_id(IdKind::Doi, "https://doi.org/10.1007/ABC").unwrap(), "10.1007/abc");
        assert!(canonical_id(IdKind::Wikidata, "nonsense").is_none());
    }
}
