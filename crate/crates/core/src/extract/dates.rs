//! Date expressions as they appear in calls for papers.

use std::sync::LazyLock;

use chrono::NaiveDate;
use regex::Regex;

const MONTH: &str = r"(jan(?:uary)?|feb(?:ruary)?|mar(?:ch)?|apr(?:il)?|may|june?|july?|aug(?:ust)?|sep(?:t(?:ember)?)?|oct(?:ober)?|nov(?:ember)?|dec(?:ember)?)\b\.?";
const DAY: &str = r"(\d{1,2})(?:st|nd|rd|th)?";
const WEEKDAY: &str = r"(?:(?:mon|tues?|wed(?:nes)?|thu(?:rs)?|fri|sat(?:ur)?|sun)(?:day)?\.?,?\s+)?";

static ISO: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(\d{4})-(\d{2})-(\d{2})\b").unwrap());
static MONTH_FIRST: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"(?i)\b{MONTH}\s+{DAY}\b(?:\s*,?\s*(\d{{4}})\b)?")).unwrap());
static DAY_FIRST: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"(?i)\b{DAY}\s+(?:of\s+)?{MONTH}(?:\s*,?\s*(\d{{4}})\b)?")).unwrap());
static NUMERIC: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(\d{1,2})[./](\d{1,2})[./](\d{4})\b").unwrap());
static WEEKDAY_PREFIX: LazyLock<Regex> = LazyLock::new(|| Regex::new(&format!("(?i)^{WEEKDAY}")).unwrap());

fn month_number(name: &str) -> u32 {
    let n = name.to_ascii_lowercase();
    const NAMES: [&str; 12] = ["jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"];
    NAMES.iter().position(|m| n.starts_with(m)).map_or(0, |i| i as u32 + 1)
}

/// A date found in running text; the year may be left implicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct DateMention {
    pub year: Option<i32>,
    pub month: u32,
    pub day: u32,
}

impl DateMention {
    pub fn matches(&self, date: NaiveDate) -> bool {
        use chrono::Datelike;
        self.month == date.month() && self.day == date.day() && self.year.is_none_or(|y| y == date.year())
    }
}

fn valid(year: Option<i32>, month: u32, day: u32) -> bool {
    NaiveDate::from_ymd_opt(year.unwrap_or(2000), month, day).is_some()
}

/// Every date expression in `text`, with named months, ISO dates, and
/// numeric dates whose day/month order is unambiguous.
pub fn find_dates(text: &str) -> Vec<DateMention> {
    let mut out = Vec::new();
    let year = |m: Option<regex::Match>| m.and_then(|m| m.as_str().parse().ok());
    for c in ISO.captures_iter(text) {
        out.push(DateMention { year: c[1].parse().ok(), month: c[2].parse().unwrap_or(0), day: c[3].parse().unwrap_or(0) });
    }
    for c in MONTH_FIRST.captures_iter(text) {
        out.push(DateMention { year: year(c.get(3)), month: month_number(&c[1]), day: c[2].parse().unwrap_or(0) });
    }
    for c in DAY_FIRST.captures_iter(text) {
        out.push(DateMention { year: year(c.get(3)), month: month_number(&c[2]), day: c[1].parse().unwrap_or(0) });
    }
    for c in NUMERIC.captures_iter(text) {
        if let Some((month, day)) = unambiguous(c[1].parse().unwrap_or(0), c[2].parse().unwrap_or(0)) {
            out.push(DateMention { year: c[3].parse().ok(), month, day });
        }
    }
    out.retain(|d| valid(d.year, d.month, d.day));
    out.sort();
    out.dedup();
    out
}

fn unambiguous(a: u32, b: u32) -> Option<(u32, u32)> {
    match (a > 12, b > 12) {
        (true, false) => Some((b, a)),
        (false, true) => Some((a, b)),
        _ if a == b => Some((a, b)),
        _ => None,
    }
}

/// Parses one date cell to a calendar date. The year is required and the
/// month must be named or in ISO position; numeric dates whose day/month
/// order cannot be told apart are rejected.
pub fn parse_date(cell: &str) -> Option<NaiveDate> {
    let s = WEEKDAY_PREFIX.replace(cell.trim(), "");
    let s = s.trim().trim_end_matches('.');
    let whole = |re: &Regex| re.captures(s).filter(|c| c.get(0).is_some_and(|m| m.start() == 0 && m.end() == s.len()));
    let (y, m, d) = if let Some(c) = whole(&ISO) {
        (c[1].parse().ok()?, c[2].parse().ok()?, c[3].parse().ok()?)
    } else if let Some(c) = whole(&MONTH_FIRST) {
        (c.get(3)?.as_str().parse().ok()?, month_number(&c[1]), c[2].parse().ok()?)
    } else if let Some(c) = whole(&DAY_FIRST) {
        (c.get(3)?.as_str().parse().ok()?, month_number(&c[2]), c[1].parse().ok()?)
    } else {
        let c = whole(&NUMERIC)?;
        let (m, d) = unambiguous(c[1].parse().ok()?, c[2].parse().ok()?)?;
        (c[3].parse().ok()?, m, d)
    };
    NaiveDate::from_ymd_opt(y, m, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn cell_formats() {
        assert_eq!(parse_date("2023-05-09"), Some(d(2023, 5, 9)));
        assert_eq!(parse_date("May 9, 2023"), Some(d(2023, 5, 9)));
        assert_eq!(parse_date("May 9th 2023"), Some(d(2023, 5, 9)));
        assert_eq!(parse_date("9 May 2023"), Some(d(2023, 5, 9)));
        assert_eq!(parse_date("Tuesday, 9th of May, 2023"), Some(d(2023, 5, 9)));
        assert_eq!(parse_date("Sept. 30, 2023"), Some(d(2023, 9, 30)));
        assert_eq!(parse_date("25/12/2023"), Some(d(2023, 12, 25)));
        assert_eq!(parse_date("05/09/2023"), None);
        assert_eq!(parse_date("May 9"), None);
        assert_eq!(parse_date("February 30, 2023"), None);
        assert_eq!(parse_date("soon"), None);
    }

    #[test]
    fn mentions_in_text() {
        let found = find_dates("Abstracts: May 2nd, 2023. Papers: 9 May 2023. Notification: July 12");
        assert!(found.iter().any(|m| m.matches(d(2023, 5, 2))));
        assert!(found.iter().any(|m| m.matches(d(2023, 5, 9))));
        assert!(found.contains(&DateMention { year: None, month: 7, day: 12 }));
        assert!(!found.iter().any(|m| m.matches(d(2023, 5, 3))));
        assert!(find_dates("we accepted 5 of 20 papers in may").is_empty());
    }
}
