//! Parsing of sentinel-terminated CSV model output.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::records::{Row, Task};

use super::dates::parse_date;

// Models write `a, "b, c"`; CSV only honours a quote at the start of a field.
static SPACE_BEFORE_QUOTE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"(^|,)\s+""#).unwrap());

/// Line that terminates every well-formed response.
pub const SENTINEL: &str = "--- complete ----";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum ParseError {
    #[error("response has no \"--- complete ----\" line")]
    MissingSentinel,
    #[error("header {found:?} does not match expected {expected:?}")]
    HeaderMismatch { expected: String, found: String },
    #[error("row {line} has {found} cells, expected {expected}")]
    RaggedRow { line: usize, expected: usize, found: usize },
    #[error("row {line}: {column} value {value:?} is not valid")]
    InvalidCell { line: usize, column: String, value: String },
    #[error("row {line}: cannot read date {value:?}")]
    InvalidDate { line: usize, value: String },
    #[error("task {0} has no text output format")]
    UnknownTask(Task),
}

fn is_absent(cell: &str) -> bool {
    matches!(cell, "" | "-" | "–" | "—")
}

fn normalize_role(raw: &str) -> Option<&'static str> {
    let r = raw.to_ascii_lowercase().replace(['-', '_', '.'], " ");
    let r = r.split_whitespace().collect::<Vec<_>>().join(" ");
    match r.as_str() {
        "pc" | "pc member" | "program committee" | "programme committee" | "program committee member"
        | "programme committee member" => Some("PC"),
        "spc" | "spc member" | "senior pc" | "senior pc member" | "senior program committee"
        | "senior programme committee" | "senior program committee member" | "senior programme committee member" => {
            Some("SPC")
        }
        _ => None,
    }
}

/// Parses a model response for `task` into rows keyed by column name.
///
/// Code fences and an `Output:` preamble are tolerated; text after the
/// sentinel is ignored. `-` marks an absent cell. Counts are stripped of
/// thousands separators, PC roles folded to `PC`/`SPC`, dates rewritten
/// as ISO-8601.
pub fn parse_output(raw: &str, task: Task) -> Result<Vec<Row>, ParseError> {
    if !task.is_text_task() {
        return Err(ParseError::UnknownTask(task));
    }
    let columns = task.columns();
    let mut body: Vec<(usize, &str)> = Vec::new();
    let mut terminated = false;
    for (i, line) in raw.lines().enumerate() {
        let t = line.trim();
        if t == SENTINEL {
            terminated = true;
            break;
        }
        if t.starts_with("```") || t.is_empty() || t.eq_ignore_ascii_case("output:") {
            continue;
        }
        body.push((i + 1, t));
    }
    if !terminated {
        return Err(ParseError::MissingSentinel);
    }
    let expected = columns.join(", ");
    let Some(&(_, header)) = body.first() else {
        return Err(ParseError::HeaderMismatch { expected, found: String::new() });
    };
    let found: Vec<String> = header.split(',').map(|h| h.trim().to_ascii_lowercase()).collect();
    if found != columns {
        return Err(ParseError::HeaderMismatch { expected, found: header.to_string() });
    }

    let mut rows = Vec::new();
    for &(line, text) in &body[1..] {
        let text = SPACE_BEFORE_QUOTE.replace_all(text, "$1\"");
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let record = match reader.records().next() {
            Some(Ok(r)) => r,
            _ => return Err(ParseError::RaggedRow { line, expected: columns.len(), found: 0 }),
        };
        if record.len() != columns.len() {
            return Err(ParseError::RaggedRow { line, expected: columns.len(), found: record.len() });
        }
        let mut row = Row::new();
        for (col, cell) in columns.iter().zip(record.iter()) {
            let value = if is_absent(cell) { None } else { Some(normalize_cell(task, col, cell, line)?) };
            row.insert(col.to_string(), value);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn normalize_cell(task: Task, column: &str, cell: &str, line: usize) -> Result<String, ParseError> {
    let invalid = || ParseError::InvalidCell { line, column: column.to_string(), value: cell.to_string() };
    match (task, column) {
        (Task::Counts, "submitted" | "accepted") => {
            let digits = cell.replace([',', ' '], "");
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(invalid());
            }
            let n: u64 = digits.parse().map_err(|_| invalid())?;
            Ok(n.to_string())
        }
        (Task::PcMembers, "role") => normalize_role(cell).map(str::to_string).ok_or_else(invalid),
        (Task::Deadlines, "date") => parse_date(cell)
            .map(|d| d.format("%Y-%m-%d").to_string())
            .ok_or_else(|| ParseError::InvalidDate { line, value: cell.to_string() }),
        _ => Ok(cell.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells(rows: &[Row], col: &str) -> Vec<Option<String>> {
        rows.iter().map(|r| r[col].clone()).collect()
    }

    #[test]
    fn absent_and_fences() {
        let raw = "```\ntrack, submitted, accepted\nPhD symposium, - , 10\n```\n--- complete ----\ntrailing chatter";
        let rows = parse_output(raw, Task::Counts).unwrap();
        assert_eq!(cells(&rows, "submitted"), [None]);
        assert_eq!(cells(&rows, "accepted"), [Some("10".into())]);
    }

    #[test]
    fn errors() {
        assert_eq!(parse_output("track, submitted, accepted\n", Task::Counts), Err(ParseError::MissingSentinel));
        assert!(matches!(
            parse_output("name, role\n--- complete ----", Task::Counts),
            Err(ParseError::HeaderMismatch { .. })
        ));
        assert!(matches!(
            parse_output("track, submitted, accepted\nresearch, 98\n--- complete ----", Task::Counts),
            Err(ParseError::RaggedRow { line: 2, expected: 3, found: 2 })
        ));
        assert!(matches!(
            parse_output("kind, date\npaper submission, 05/09/2023\n--- complete ----", Task::Deadlines),
            Err(ParseError::InvalidDate { .. })
        ));
        assert_eq!(parse_output("x", Task::Papers), Err(ParseError::UnknownTask(Task::Papers)));
    }

    #[test]
    fn normalizations() {
        let rows = parse_output(
            "name, track, role\n\"Celino, Irene\", research, Senior PC member\nJan Novak, research, pc\n--- complete ----",
            Task::PcMembers,
        )
        .unwrap();
        assert_eq!(cells(&rows, "name")[0].as_deref(), Some("Celino, Irene"));
        assert_eq!(cells(&rows, "role"), [Some("SPC".into()), Some("PC".into())]);
        let rows = parse_output("kind, date\npaper submission, May 9th, 2023\n--- complete ----", Task::Deadlines);
        assert!(matches!(rows, Err(ParseError::RaggedRow { .. })));
        let rows = parse_output("kind, date\npaper submission, \"May 9th, 2023\"\n--- complete ----", Task::Deadlines)
            .unwrap();
        assert_eq!(cells(&rows, "date"), [Some("2023-05-09".into())]);
        let rows = parse_output("track, submitted, accepted\nresearch, \"1,024\", 200\n--- complete ----", Task::Counts)
            .unwrap();
        assert_eq!(cells(&rows, "submitted"), [Some("1024".into())]);
    }
}
