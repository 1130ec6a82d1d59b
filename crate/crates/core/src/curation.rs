//! Human review decisions on extraction records.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::extract::parse_date;
use crate::model::{Qid, TrackStats};
use crate::reconcile::{apply_decision, Mention, Outcome, ReconciliationDecision};
use crate::records::{ExtractionRecord, ReviewState, Row, Task};
use crate::store::AuditEntry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Approve,
    Reject,
    /// Replace the row; the corrected row is approved with it.
    Edit,
    /// Approve and resolve the entity to `candidate`.
    Link,
    /// Approve and mint a new entity for the mention.
    NewEntity,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Approve => "approve",
            Action::Reject => "reject",
            Action::Edit => "edit",
            Action::Link => "link",
            Action::NewEntity => "new_entity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionRequest {
    pub action: Action,
    /// The record version the curator saw.
    #[serde(default)]
    pub version: Option<u64>,
    #[serde(default)]
    pub row: Option<Row>,
    #[serde(default)]
    pub candidate: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecisionError {
    #[error("unknown record {0}")]
    NotFound(String),
    #[error("record {id} changed: version {current}, request was for {requested}")]
    StaleVersion { id: String, current: u64, requested: u64 },
    #[error("record {id} is already {state}")]
    AlreadyDecided { id: String, state: &'static str },
    #[error("invalid decision: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> DecisionError {
    DecisionError::Invalid(msg.into())
}

fn count(row: &Row, col: &str) -> Result<Option<u64>, DecisionError> {
    match row.get(col).and_then(|c| c.as_deref()).map(str::trim).filter(|s| !s.is_empty()) {
        None => Ok(None),
        Some(v) => v.replace(',', "").parse().map(Some).map_err(|_| invalid(format!("{col} is not a count: {v:?}"))),
    }
}

/// Checks an edited row and brings dates to ISO form.
pub fn validate_row(task: Task, row: &Row) -> Result<Row, DecisionError> {
    let mut out = Row::new();
    for col in task.columns() {
        out.insert(col.to_string(), row.get(*col).cloned().flatten().map(|v| v.trim().to_string()).filter(|v| !v.is_empty()));
    }
    if let Some(extra) = row.keys().find(|k| !task.columns().contains(&k.as_str())) {
        return Err(invalid(format!("{task} has no column {extra}")));
    }
    match task {
        Task::Counts => {
            let track = out["track"].clone().ok_or_else(|| invalid("track is required"))?;
            TrackStats::new(track, count(&out, "submitted")?, count(&out, "accepted")?).map_err(|e| invalid(e.to_string()))?;
        }
        Task::Deadlines => {
            let raw = out["date"].clone().ok_or_else(|| invalid("date is required"))?;
            let date = parse_date(&raw).ok_or_else(|| invalid(format!("unparseable date {raw:?}")))?;
            out.insert("date".into(), Some(date.to_string()));
        }
        Task::PcMembers => {
            if let Some(role) = &out["role"] {
                if !matches!(role.to_uppercase().as_str(), "PC" | "SPC") {
                    return Err(invalid(format!("pc role must be PC or SPC, got {role:?}")));
                }
            }
        }
        _ => {}
    }
    for key in ["name", "title", "kind"] {
        if out.contains_key(key) && out[key].is_none() {
            return Err(invalid(format!("{key} is required")));
        }
    }
    Ok(out)
}

/// Applies a curator decision to a copy of `record`.
pub fn decide(
    record: &ExtractionRecord,
    req: &DecisionRequest,
    actor: &str,
    now: DateTime<Utc>,
) -> Result<(ExtractionRecord, AuditEntry), DecisionError> {
    if let Some(v) = req.version {
        if v != record.version {
            return Err(DecisionError::StaleVersion { id: record.id.clone(), current: record.version, requested: v });
        }
    }
    if record.review_state.is_final() {
        return Err(DecisionError::AlreadyDecided { id: record.id.clone(), state: record.review_state.as_str() });
    }
    let mut next = record.clone();
    let mut decision = None;
    let needs_entity = Mention::of_record(record).is_some();
    let reconcile = |next: &mut ExtractionRecord, outcome, target| -> Result<ReconciliationDecision, DecisionError> {
        let d = ReconciliationDecision::new(&next.id, outcome, target, actor, now).map_err(|e| invalid(e.to_string()))?;
        apply_decision(next, &d).map_err(|e| invalid(e.to_string()))?;
        Ok(d)
    };
    match req.action {
        Action::Approve => {
            if needs_entity && next.entity.is_none() {
                return Err(invalid("record has no entity yet; link it or create a new entity"));
            }
            next.review_state = ReviewState::Approved;
            next.version += 1;
        }
        Action::Reject => {
            next.review_state = ReviewState::Rejected;
            next.version += 1;
        }
        Action::Edit => {
            let row = req.row.as_ref().ok_or_else(|| invalid("edit needs a row"))?;
            next.edited_row = Some(validate_row(record.task, row)?);
            if needs_entity && next.entity.is_none() {
                decision = Some(reconcile(&mut next, Outcome::HumanNew, None)?);
            }
            next.review_state = ReviewState::Edited;
            next.version = record.version + 1;
        }
        Action::Link => {
            if !needs_entity {
                return Err(invalid(format!("{} records have no entity to link", record.task)));
            }
            let raw = req.candidate.as_deref().ok_or_else(|| invalid("link needs a candidate"))?;
            let qid: Qid = raw.trim().parse().map_err(|_| invalid(format!("candidate {raw:?} is not a QID")))?;
            decision = Some(reconcile(&mut next, Outcome::HumanLinked, Some(qid.into()))?);
        }
        Action::NewEntity => {
            if !needs_entity {
                return Err(invalid(format!("{} records have no entity", record.task)));
            }
            decision = Some(reconcile(&mut next, Outcome::HumanNew, None)?);
        }
    }
    let entry = AuditEntry {
        record_id: record.id.clone(),
        action: req.action.as_str().to_string(),
        actor: actor.to_string(),
        at: now,
        from_state: record.review_state,
        to_state: next.review_state,
        version: next.version,
        decision,
    };
    Ok((next, entry))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::{row, SourceKind};
    use url::Url;

    fn counts() -> ExtractionRecord {
        let r = row([("track", Some("research")), ("submitted", Some("119")), ("accepted", Some("26"))]);
        let mut rec = ExtractionRecord::new(Task::Counts, "eswc2020", SourceKind::FrontMatter, Url::parse("https://x.org/").unwrap(), r);
        rec.review_state = ReviewState::NeedsReview;
        rec
    }

    fn req(action: Action) -> DecisionRequest {
        DecisionRequest { action, version: None, row: None, candidate: None }
    }

    #[test]
    fn edit_persists_row() {
        let rec = counts();
        let mut r = req(Action::Edit);
        r.row = Some(row([("track", Some("research")), ("submitted", Some("166")), ("accepted", Some("26"))]));
        r.version = Some(rec.version);
        let (next, audit) = decide(&rec, &r, "curator", Utc::now()).unwrap();
        assert_eq!(next.review_state, ReviewState::Edited);
        assert_eq!(next.cell("submitted"), Some("166"));
        assert_eq!(next.row["submitted"].as_deref(), Some("119"));
        assert_eq!(audit.to_state, ReviewState::Edited);
        assert!(matches!(decide(&next, &req(Action::Approve), "c", Utc::now()), Err(DecisionError::AlreadyDecided { .. })));
    }

    #[test]
    fn edit_validation_and_versions() {
        let rec = counts();
        let mut r = req(Action::Edit);
        r.row = Some(row([("track", Some("research")), ("submitted", Some("10")), ("accepted", Some("26"))]));
        assert!(matches!(decide(&rec, &r, "c", Utc::now()), Err(DecisionError::Invalid(_))));
        let mut stale = req(Action::Approve);
        stale.version = Some(rec.version + 5);
        assert!(matches!(decide(&rec, &stale, "c", Utc::now()), Err(DecisionError::StaleVersion { .. })));
        assert!(matches!(decide(&rec, &req(Action::Link), "c", Utc::now()), Err(DecisionError::Invalid(_))));
    }

    #[test]
    fn link_and_new_entity() {
        let r = row([("name", Some("J. Smith")), ("role", Some("general chair"))]);
        let mut rec = ExtractionRecord::new(Task::Roles, "x2023", SourceKind::FrontMatter, Url::parse("https://x.org/").unwrap(), r);
        rec.review_state = ReviewState::NeedsReview;
        assert!(decide(&rec, &req(Action::Approve), "c", Utc::now()).is_err());
        let mut link = req(Action::Link);
        link.candidate = Some("Q42".into());
        let (next, audit) = decide(&rec, &link, "c", Utc::now()).unwrap();
        assert_eq!(next.entity.as_ref().map(|e| e.to_string()).as_deref(), Some("Q42"));
        assert_eq!(next.review_state, ReviewState::Approved);
        assert!(audit.decision.is_some());
        let (next, _) = decide(&rec, &req(Action::NewEntity), "c", Utc::now()).unwrap();
        assert!(next.entity.as_ref().is_some_and(|e| !e.is_resolved()));
    }
}
