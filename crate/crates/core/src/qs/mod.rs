//! QuickStatements V1 output: value rendering, the mapping schema, batch
//! compilation and validation.

mod compile;
mod grammar;
mod schema;
mod validate;

pub use compile::{compile, BatchStats, CompileError, QsBatch};
pub use grammar::{
    parse_line, parse_line_value, parse_value, quote, render_value, tokenize, Command, GrammarError, LineValue, Subject,
    TermKind,
};
pub use schema::{ColumnBinding, Derive, Fallback, MappingSchema, Slot, SubjectSource, TargetType};
pub use validate::{validate_batch, ValidationReport, Violation};
