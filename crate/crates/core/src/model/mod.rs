//! Wikidata-shaped statement model, identifier validation and the mapping
//! vocabulary that ties logical fields to properties and qualifier items.

mod fields;
mod ids;
mod statement;
mod stats;
mod value;
mod vocabulary;

pub use fields::{build_statement, qualifier_patterns, Field, Payload};
pub use ids::{validate_entity_ref, EntityRef, Pid, Qid};
pub use statement::Statement;
pub use stats::{admission_rate, TrackStats};
pub use value::{Quantity, TimePrecision, Value, ValueKind, WikiTime};
pub use vocabulary::{
    normalize_label, normalize_track, LabelSet, MappingVocabulary, PropertyKey, DEFAULT_VOCABULARY_JSON,
    REQUIRED_DEADLINES,
};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("malformed identifier {0:?}")]
    MalformedIdentifier(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("invalid statement: {0}")]
    InvalidStatement(String),
    #[error("field {field:?} is not bound: vocabulary has no {key:?} property")]
    UnboundField { field: Field, key: PropertyKey },
    #[error("field {field:?} requires operand {operand:?}")]
    MissingQualifierOperand { field: Field, operand: &'static str },
    #[error("unknown {set} label {label:?}")]
    UnknownLabel { set: &'static str, label: String },
    #[error("vocabulary: {0}")]
    Vocabulary(String),
}
