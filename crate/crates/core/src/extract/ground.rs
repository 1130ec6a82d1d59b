//! Grounding: does every extracted value actually occur in the source?

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use unicode_normalization::UnicodeNormalization;

use crate::records::{Grounding, Row, Task};

use super::dates::{find_dates, parse_date};

/// How a column is checked against the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    Number,
    Date,
    Name,
    Label,
}

pub fn cell_class(task: Task, column: &str) -> CellClass {
    match (task, column) {
        (Task::Counts, "submitted" | "accepted") | (Task::Authorships, "ordinal") => CellClass::Number,
        (Task::Deadlines, "date") => CellClass::Date,
        (_, "name" | "title") => CellClass::Name,
        _ => CellClass::Label,
    }
}

static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+(?:[.,]\d+)*").unwrap());
static WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b[a-z]+(?:-[a-z]+)?\b").unwrap());

const UNITS: [&str; 20] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen",
];
const TENS: [&str; 8] = ["twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"];

fn number_word(word: &str) -> Option<u64> {
    let w = word.to_ascii_lowercase();
    if let Some(i) = UNITS.iter().position(|u| *u == w) {
        return Some(i as u64);
    }
    let (tens, unit) = w.split_once('-').unwrap_or((&w, ""));
    let t = TENS.iter().position(|x| *x == tens)? as u64 * 10 + 20;
    if unit.is_empty() {
        return Some(t);
    }
    let u = UNITS[1..10].iter().position(|x| *x == unit)? as u64 + 1;
    Some(t + u)
}

/// Numeric tokens of a text: digit runs with thousands separators removed,
/// plus spelled-out numbers below one hundred.
pub fn number_tokens(text: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for m in NUMBER.find_iter(text) {
        let s = m.as_str();
        out.insert(s.replace(',', ""));
        for part in s.split(['.', ',']) {
            out.insert(part.trim_start_matches('0').to_string());
            out.insert(part.to_string());
        }
    }
    out.remove("");
    for w in WORD.find_iter(text) {
        if let Some(n) = number_word(w.as_str()) {
            out.insert(n.to_string());
        }
    }
    out
}

/// Case-folded, compatibility-normalized text with whitespace collapsed.
pub fn fold(text: &str) -> String {
    let lowered: String = text.nfkc().flat_map(char::to_lowercase).collect();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Precomputed view of a source text for repeated checks.
pub struct Source {
    folded: String,
    numbers: BTreeSet<String>,
    dates: Vec<super::dates::DateMention>,
}

impl Source {
    pub fn new(text: &str) -> Self {
        Source { folded: fold(text), numbers: number_tokens(text), dates: find_dates(text) }
    }

    pub fn check(&self, class: CellClass, cell: &str) -> Grounding {
        let ok = match class {
            CellClass::Label => return Grounding::NotApplicable,
            CellClass::Number => {
                let digits = cell.replace(',', "");
                self.numbers.contains(&digits)
            }
            CellClass::Date => match parse_date(cell) {
                Some(d) => self.dates.iter().any(|m| {
                    use chrono::Datelike;
                    m.matches(d) && (m.year.is_some() || self.numbers.contains(&d.year().to_string()))
                }),
                None => false,
            },
            CellClass::Name => {
                let needle = fold(cell);
                !needle.is_empty() && self.folded.contains(&needle)
            }
        };
        if ok { Grounding::Grounded } else { Grounding::Ungrounded }
    }

    pub fn ground_row(&self, task: Task, row: &Row) -> BTreeMap<String, Grounding> {
        row.iter()
            .map(|(col, v)| {
                let g = match v {
                    Some(v) => self.check(cell_class(task, col), v),
                    None => Grounding::NotApplicable,
                };
                (col.clone(), g)
            })
            .collect()
    }
}

/// Grounding map for each row against `source_text`.
pub fn ground_check(rows: &[Row], task: Task, source_text: &str) -> Vec<BTreeMap<String, Grounding>> {
    if rows.is_empty() {
        return Vec::new();
    }
    let source = Source::new(source_text);
    rows.iter().map(|r| source.ground_row(task, r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_words() {
        assert_eq!(number_word("ten"), Some(10));
        assert_eq!(number_word("Twenty-five"), Some(25));
        assert_eq!(number_word("ninety"), Some(90));
        assert_eq!(number_word("tenth"), None);
        assert_eq!(number_word("twenty-ten"), None);
    }

    #[test]
    fn tokens() {
        let t = number_tokens("received 1,245 submissions; rate 23.5%, ten demos, 007");
        for want in ["1245", "1", "245", "23.5", "23", "5", "10", "007", "7"] {
            assert!(t.contains(want), "{want} in {t:?}");
        }
        assert!(!t.contains("12"));
    }

    #[test]
    fn names_fold_ligatures_and_case() {
        let s = Source::new("Scientiﬁc  Chair:\nIRENE   Celino");
        assert_eq!(s.check(CellClass::Name, "Irene Celino"), Grounding::Grounded);
        assert_eq!(s.check(CellClass::Name, "scientific chair"), Grounding::Grounded);
        assert_eq!(s.check(CellClass::Name, "Maria Rossi"), Grounding::Ungrounded);
    }

    #[test]
    fn dates() {
        let s = Source::new("Important Dates 2023: Paper submission May 9. Camera-ready: 1 August 2023");
        assert_eq!(s.check(CellClass::Date, "2023-05-09"), Grounding::Grounded);
        assert_eq!(s.check(CellClass::Date, "2023-08-01"), Grounding::Grounded);
        assert_eq!(s.check(CellClass::Date, "2024-05-09"), Grounding::Ungrounded);
        assert_eq!(s.check(CellClass::Date, "2023-05-10"), Grounding::Ungrounded);
    }
}
