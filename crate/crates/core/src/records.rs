//! Extraction records: one fact row with provenance, grounding and review
//! state. Every harvester produces these; the store owns their lifecycle.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use url::Url;

use crate::model::EntityRef;
use crate::reconcile::CandidateMatch;

pub type Row = BTreeMap<String, Option<String>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Counts,
    Roles,
    PcMembers,
    Deadlines,
    Sponsors,
    Awards,
    Papers,
    Authorships,
}

impl Task {
    pub const ALL: [Task; 8] = [
        Task::Counts,
        Task::Roles,
        Task::PcMembers,
        Task::Deadlines,
        Task::Sponsors,
        Task::Awards,
        Task::Papers,
        Task::Authorships,
    ];

    /// Tasks answered by prompting a model over text.
    pub const TEXT: [Task; 6] =
        [Task::Counts, Task::Roles, Task::PcMembers, Task::Deadlines, Task::Sponsors, Task::Awards];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Counts => "counts",
            Task::Roles => "roles",
            Task::PcMembers => "pc_members",
            Task::Deadlines => "deadlines",
            Task::Sponsors => "sponsors",
            Task::Awards => "awards",
            Task::Papers => "papers",
            Task::Authorships => "authorships",
        }
    }

    /// Column names of a row, in output order.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Task::Counts => &["track", "submitted", "accepted"],
            Task::Roles => &["name", "role"],
            Task::PcMembers => &["name", "track", "role"],
            Task::Deadlines => &["kind", "date"],
            Task::Sponsors => &["name", "level"],
            Task::Awards => &["name", "award"],
            Task::Papers => &["iri", "title", "doi", "pages", "year"],
            Task::Authorships => &["paper_iri", "name", "ordinal", "orcid", "wikidata", "scholar"],
        }
    }

    pub fn is_text_task(self) -> bool {
        Task::TEXT.contains(&self)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown task {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    FrontMatter,
    Website,
    Sparql,
    Manual,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::FrontMatter => "front_matter",
            SourceKind::Website => "website",
            SourceKind::Sparql => "sparql",
            SourceKind::Manual => "manual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grounding {
    Grounded,
    Ungrounded,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewState {
    AutoOk,
    NeedsReview,
    Approved,
    Rejected,
    Edited,
}

impl ReviewState {
    pub fn as_str(self) -> &'static str {
        match self {
            ReviewState::AutoOk => "auto_ok",
            ReviewState::NeedsReview => "needs_review",
            ReviewState::Approved => "approved",
            ReviewState::Rejected => "rejected",
            ReviewState::Edited => "edited",
        }
    }

    pub fn is_final(self) -> bool {
        matches!(self, ReviewState::Approved | ReviewState::Rejected | ReviewState::Edited)
    }

    /// States whose facts may be exported.
    pub fn is_exportable(self) -> bool {
        matches!(self, ReviewState::AutoOk | ReviewState::Approved | ReviewState::Edited)
    }

    pub fn can_become(self, next: ReviewState) -> bool {
        !self.is_final() && next.is_final()
    }
}

impl FromStr for ReviewState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            ReviewState::AutoOk,
            ReviewState::NeedsReview,
            ReviewState::Approved,
            ReviewState::Rejected,
            ReviewState::Edited,
        ]
        .into_iter()
        .find(|r| r.as_str() == s)
        .ok_or_else(|| format!("unknown review state {s:?}"))
    }
}

/// Byte offsets of the source chunk within its document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub id: String,
    pub task: Task,
    pub conference_key: String,
    pub source_kind: SourceKind,
    pub source_url: Url,
    #[serde(default)]
    pub chunk_span: Option<ChunkSpan>,
    pub row: Row,
    #[serde(default)]
    pub grounding: BTreeMap<String, Grounding>,
    pub review_state: ReviewState,
    #[serde(default)]
    pub edited_row: Option<Row>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub entity: Option<EntityRef>,
    #[serde(default)]
    pub candidates: Vec<CandidateMatch>,
    #[serde(default = "first_version")]
    pub version: u64,
}

fn first_version() -> u64 {
    1
}

/// Stable record id: a digest of task, conference and the row contents.
pub fn record_id(task: Task, conference_key: &str, row: &Row) -> String {
    let mut h = Sha256::new();
    h.update(task.as_str());
    h.update([0x1f]);
    h.update(conference_key);
    for (k, v) in row {
        h.update([0x1e]);
        h.update(k);
        h.update([0x1f]);
        match v {
            Some(v) => h.update(v),
            None => h.update([0]),
        }
    }
    let digest = h.finalize();
    format!("{}-{}", task.as_str(), hex::encode(&digest[..8]))
}

impl ExtractionRecord {
    /// A fresh record. Grounding starts empty, so the state is `auto_ok`
    /// until [`set_grounding`](Self::set_grounding) says otherwise.
    pub fn new(task: Task, conference_key: impl Into<String>, source_kind: SourceKind, source_url: Url, row: Row) -> Self {
        let conference_key = conference_key.into();
        ExtractionRecord {
            id: record_id(task, &conference_key, &row),
            task,
            conference_key,
            source_kind,
            source_url,
            chunk_span: None,
            row,
            grounding: BTreeMap::new(),
            review_state: ReviewState::AutoOk,
            edited_row: None,
            model: None,
            entity: None,
            candidates: Vec::new(),
            version: 1,
        }
    }

    pub fn set_grounding(&mut self, grounding: BTreeMap<String, Grounding>) {
        self.grounding = grounding;
        if self.has_ungrounded() && !self.review_state.is_final() {
            self.review_state = ReviewState::NeedsReview;
        }
    }

    pub fn has_ungrounded(&self) -> bool {
        self.grounding.values().any(|g| *g == Grounding::Ungrounded)
    }

    /// The row that should be exported: the curator's edit if any.
    pub fn effective_row(&self) -> &Row {
        match (&self.review_state, &self.edited_row) {
            (ReviewState::Edited, Some(row)) => row,
            _ => &self.row,
        }
    }

    pub fn cell(&self, column: &str) -> Option<&str> {
        self.effective_row().get(column).and_then(|v| v.as_deref())
    }
}

/// Builds a row from `(column, value)` pairs; `None` marks an absent cell.
pub fn row<'a>(cells: impl IntoIterator<Item = (&'a str, Option<&'a str>)>) -> Row {
    cells.into_iter().map(|(k, v)| (k.to_string(), v.map(str::to_string))).collect()
}
