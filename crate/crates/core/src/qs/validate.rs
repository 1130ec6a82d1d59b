use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{qualifier_patterns, MappingVocabulary, Value};

use super::grammar::{parse_line, Command, LineValue};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub lines: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-parses every line and checks qualifier patterns, references and
/// `LAST` usage. Never fails; problems become report entries.
pub fn validate_batch(text: &str, vocab: &MappingVocabulary) -> ValidationReport {
    let patterns = qualifier_patterns(vocab);
    let mut report = ValidationReport::default();
    let mut created = false;
    for (i, line) in text.lines().enumerate() {
        report.lines += 1;
        let mut flag = |message: String| report.violations.push(Violation { line: i + 1, message });
        let cmd = match parse_line(line) {
            Ok(c) => c,
            Err(e) => {
                flag(e.to_string());
                continue;
            }
        };
        match cmd {
            Command::Create => created = true,
            Command::Term { subject, .. } => {
                if subject == super::grammar::Subject::Last && !created {
                    flag("LAST used before any CREATE".into());
                }
            }
            Command::Statement { subject, property, value, qualifiers, sources } => {
                let uses_last = subject == super::grammar::Subject::Last
                    || value == LineValue::Last
                    || qualifiers.iter().chain(&sources).any(|(_, v)| *v == LineValue::Last);
                if uses_last && !created {
                    flag("LAST used before any CREATE".into());
                }
                if sources.is_empty() {
                    flag(format!("statement {property} has no reference"));
                }
                for (p, v) in &sources {
                    if !matches!(v, LineValue::Value(Value::String { .. })) {
                        flag(format!("reference S{} must be a quoted string or URL", p.number()));
                    }
                }
                let mut seen = BTreeSet::new();
                for (p, _) in &qualifiers {
                    if !seen.insert(*p) {
                        flag(format!("qualifier {p} repeated"));
                    }
                }
                match patterns.get(&property) {
                    Some(allowed) => {
                        for p in seen.difference(allowed) {
                            flag(format!("qualifier {p} not allowed on {property}"));
                        }
                        for p in allowed.difference(&seen) {
                            flag(format!("{property} requires qualifier {p}"));
                        }
                    }
                    None => {
                        for p in &seen {
                            flag(format!("qualifier {p} not allowed on {property}"));
                        }
                    }
                }
            }
        }
    }
    report
}
