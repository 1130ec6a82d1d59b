use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    canonical_id, normalize_name, trigram_jaccard, CandidateMatch, EntityKind, EntityLookup, Evidence, IdKind, Mention,
    ReconcileError, MIN_SIMILARITY,
};
use crate::model::{EntityRef, Qid};

/// One line of the entity index snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub qid: Qid,
    pub labels: Vec<String>,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default)]
    pub orcid: Option<String>,
    #[serde(default)]
    pub dblp: Option<String>,
    #[serde(default)]
    pub doi: Option<String>,
    #[serde(default)]
    pub kind: Option<EntityKind>,
}

impl IndexEntry {
    fn id(&self, kind: IdKind) -> Option<String> {
        match kind {
            IdKind::Wikidata => Some(self.qid.to_string()),
            IdKind::Orcid => self.orcid.as_deref().and_then(|v| canonical_id(kind, v)),
            IdKind::Dblp => self.dblp.as_deref().and_then(|v| canonical_id(kind, v)),
            IdKind::Doi => self.doi.as_deref().and_then(|v| canonical_id(kind, v)),
        }
    }

    fn label(&self) -> String {
        self.labels.first().cloned().unwrap_or_default()
    }
}

/// In-memory entity snapshot keyed by external ids and names.
#[derive(Debug, Clone, Default)]
pub struct EntityIndex {
    entries: Vec<IndexEntry>,
    by_id: BTreeMap<(IdKind, String), Vec<usize>>,
    names: Vec<Vec<String>>,
}

impl EntityIndex {
    pub fn from_entries(entries: Vec<IndexEntry>) -> Self {
        let mut by_id: BTreeMap<(IdKind, String), Vec<usize>> = BTreeMap::new();
        let mut names = Vec::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            for kind in [IdKind::Wikidata, IdKind::Orcid, IdKind::Dblp, IdKind::Doi] {
                if let Some(v) = e.id(kind) {
                    by_id.entry((kind, v)).or_default().push(i);
                }
            }
            names.push(e.labels.iter().chain(&e.aliases).map(|n| normalize_name(n)).collect());
        }
        EntityIndex { entries, by_id, names }
    }

    /// Reads a JSON-Lines snapshot; blank lines are ignored.
    pub fn load(path: &Path) -> Result<Self, ReconcileError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ReconcileError::IndexUnavailable(format!("{}: {e}", path.display())))?;
        Self::parse_jsonl(&text)
    }

    pub fn parse_jsonl(text: &str) -> Result<Self, ReconcileError> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: IndexEntry = serde_json::from_str(line)
                .map_err(|e| ReconcileError::IndexUnavailable(format!("line {}: {e}", n + 1)))?;
            entries.push(e);
        }
        Ok(Self::from_entries(entries))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn exact(&self, record_id: &str, mention: &Mention) -> Vec<CandidateMatch> {
        let mut hits: BTreeMap<usize, Vec<Evidence>> = BTreeMap::new();
        for (kind, value) in &mention.ids {
            for &i in self.by_id.get(&(*kind, value.clone())).into_iter().flatten() {
                hits.entry(i).or_default().push(Evidence::ExactExternalId { kind: *kind });
            }
        }
        hits.into_iter()
            .map(|(i, evidence)| CandidateMatch {
                record_id: record_id.to_string(),
                candidate: EntityRef::Resolved(self.entries[i].qid),
                label: self.entries[i].label(),
                score: 1.0,
                evidence,
            })
            .collect()
    }
}

impl EntityLookup for EntityIndex {
    fn candidates(&self, record_id: &str, mention: &Mention) -> Result<Vec<CandidateMatch>, ReconcileError> {
        let exact = self.exact(record_id, mention);
        if !exact.is_empty() {
            return Ok(exact);
        }
        let name = normalize_name(&mention.name);
        if name.is_empty() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for (i, entry) in self.entries.iter().enumerate() {
            let type_match = match (mention.kind, entry.kind) {
                (Some(a), Some(b)) if a != b => continue,
                (Some(_), Some(_)) => true,
                _ => false,
            };
            let sim = self.names[i].iter().map(|n| trigram_jaccard(&name, n)).fold(0.0, f64::max);
            if sim < MIN_SIMILARITY {
                continue;
            }
            let mut evidence = vec![Evidence::NameSimilarity { value: sim }];
            let mut score = 0.95 * sim;
            if type_match {
                evidence.push(Evidence::TypeMatch);
                score += 0.04;
            }
            for (kind, ours) in &mention.ids {
                if let Some(theirs) = entry.id(*kind) {
                    if &theirs != ours {
                        evidence.push(Evidence::ConflictingExternalId { kind: *kind, ours: ours.clone(), theirs });
                    }
                }
            }
            out.push(CandidateMatch {
                record_id: record_id.to_string(),
                candidate: EntityRef::Resolved(entry.qid),
                label: entry.label(),
                score: score.clamp(0.0, 1.0),
                evidence,
            });
        }
        Ok(out)
    }
}
