use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{EntityRef, ModelError, Pid, Value, ValueKind};

/// A subject–property–value claim with qualifiers and references.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawStatement")]
pub struct Statement {
    subject: EntityRef,
    property: Pid,
    value: Value,
    qualifiers: Vec<(Pid, Value)>,
    references: Vec<(Pid, Value)>,
}

#[derive(Deserialize)]
struct RawStatement {
    subject: EntityRef,
    property: Pid,
    value: Value,
    #[serde(default)]
    qualifiers: Vec<(Pid, Value)>,
    #[serde(default)]
    references: Vec<(Pid, Value)>,
}

impl TryFrom<RawStatement> for Statement {
    type Error = ModelError;

    fn try_from(raw: RawStatement) -> Result<Self, Self::Error> {
        Statement::new(raw.subject, raw.property, raw.value, raw.qualifiers, raw.references)
    }
}

impl Statement {
    pub fn new(
        subject: EntityRef,
        property: Pid,
        value: Value,
        qualifiers: Vec<(Pid, Value)>,
        references: Vec<(Pid, Value)>,
    ) -> Result<Self, ModelError> {
        value.validate()?;
        let mut seen = BTreeSet::new();
        for (pid, v) in &qualifiers {
            v.validate()?;
            if !seen.insert(*pid) {
                return Err(ModelError::InvalidStatement(format!(
                    "qualifier {pid} repeated on {property}"
                )));
            }
        }
        for (pid, v) in &references {
            v.validate()?;
            if !matches!(v.kind(), ValueKind::Url | ValueKind::String) {
                return Err(ModelError::InvalidStatement(format!(
                    "reference {pid} must be a URL or string"
                )));
            }
        }
        Ok(Statement { subject, property, value, qualifiers, references })
    }

    pub fn subject(&self) -> &EntityRef {
        &self.subject
    }

    pub fn property(&self) -> Pid {
        self.property
    }

    pub fn value(&self) -> &Value {
        &self.value
    }

    pub fn qualifiers(&self) -> &[(Pid, Value)] {
        &self.qualifiers
    }

    pub fn references(&self) -> &[(Pid, Value)] {
        &self.references
    }

    /// Item references this statement mentions, subject first.
    pub fn mentioned_entities(&self) -> impl Iterator<Item = &EntityRef> {
        std::iter::once(&self.subject)
            .chain(self.value.as_item())
            .chain(self.qualifiers.iter().filter_map(|(_, v)| v.as_item()))
    }
}
