//! Declarative mapping from record columns to statements.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{EntityRef, Field, MappingVocabulary};
use crate::records::Task;

use super::CompileError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetType {
    Event,
    Person,
    Paper,
}

/// Payload slots a binding can fill from a column or a constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Item,
    Track,
    Role,
    Level,
    Award,
    Kind,
    Class,
    Date,
    Amount,
    Text,
    Lang,
    Ordinal,
}

/// Where a statement's subject comes from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectSource {
    /// The event entity configured for the record's conference.
    #[default]
    Conference,
    /// The record's own reconciled entity.
    Entity,
    /// The entity of another record of the same conference whose
    /// `key_column` equals this record's `via_column`.
    Linked { task: Task, key_column: String, via_column: String },
}

/// Values computed from several columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Derive {
    AdmissionRate { submitted: String, accepted: String },
}

/// Used when the primary statement would need two new entities at once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fallback {
    pub field: Field,
    pub text_column: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnBinding {
    pub task: Task,
    pub field: Field,
    #[serde(default)]
    pub subject: SubjectSource,
    #[serde(default)]
    pub operands: BTreeMap<Slot, String>,
    #[serde(default)]
    pub constants: BTreeMap<Slot, String>,
    #[serde(default)]
    pub derive: Option<Derive>,
    #[serde(default)]
    pub fallback: Option<Fallback>,
    /// Class label (vocabulary `classes`) given to entities this binding
    /// creates.
    #[serde(default)]
    pub new_entity_class: Option<String>,
    /// Overrides the schema's label bindings for entities this binding creates.
    #[serde(default)]
    pub label_bindings: Option<BTreeMap<String, String>>,
}

impl ColumnBinding {
    pub fn columns(&self) -> impl Iterator<Item = &str> {
        let derived: Vec<&str> = match &self.derive {
            Some(Derive::AdmissionRate { submitted, accepted }) => vec![submitted, accepted],
            None => vec![],
        };
        let subject: Vec<&str> = match &self.subject {
            SubjectSource::Linked { via_column, .. } => vec![via_column],
            _ => vec![],
        };
        self.operands
            .values()
            .map(String::as_str)
            .chain(derived)
            .chain(subject)
            .chain(self.fallback.iter().map(|f| f.text_column.as_str()))
            .chain(self.label_bindings.iter().flat_map(|m| m.values().map(String::as_str)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingSchema {
    pub target_type: TargetType,
    /// Event entity per conference key.
    #[serde(default)]
    pub subjects: BTreeMap<String, EntityRef>,
    /// Language → column for labels of created entities.
    #[serde(default)]
    pub label_bindings: BTreeMap<String, String>,
    pub column_bindings: Vec<ColumnBinding>,
}

impl MappingSchema {
    pub fn from_json(text: &str) -> Result<Self, CompileError> {
        serde_json::from_str(text).map_err(|e| CompileError::Schema(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CompileError> {
        let text = std::fs::read_to_string(path).map_err(|e| CompileError::Schema(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks that every column a binding names belongs to its task and that
    /// every bound field has a property in the vocabulary.
    pub fn check(&self, vocab: &MappingVocabulary) -> Result<(), CompileError> {
        for b in &self.column_bindings {
            let known = b.task.columns();
            let label_cols = match &b.label_bindings {
                Some(_) => None,
                None if b.new_entity_class.is_some() => Some(self.label_bindings.values()),
                None => None,
            };
            for col in b.columns().chain(label_cols.into_iter().flatten().map(String::as_str)) {
                if !known.contains(&col) {
                    return Err(CompileError::SchemaColumnMissing { task: b.task, column: col.to_string() });
                }
            }
            for field in std::iter::once(b.field).chain(b.fallback.as_ref().map(|f| f.field)) {
                if vocab.property(field.property_key()).is_none() {
                    return Err(CompileError::ConstraintViolation(format!(
                        "field {field:?} has no property in the vocabulary"
                    )));
                }
            }
        }
        Ok(())
    }
}
