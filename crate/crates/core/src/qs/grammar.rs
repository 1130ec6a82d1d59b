//! QuickStatements V1 line grammar: value rendering and a parser used to
//! re-check emitted batches.
//!
//! ```text
//! CREATE
//! LAST|Len|"Irene Celino"
//! Q119153957|P5804|LAST|P518|Q1|P3831|Q2|S854|"https://…"
//! ```
//!
//! Fields are separated by `|` (a literal tab is also accepted). Strings are
//! double-quoted with `\"` and `\\` escapes.

use std::sync::LazyLock;

use regex::Regex;
use rust_decimal::Decimal;

use crate::model::{EntityRef, Pid, Qid, Value, ValueKind, WikiTime};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GrammarError {
    #[error("empty line")]
    Empty,
    #[error("unterminated string")]
    UnterminatedString,
    #[error("bad subject {0:?}")]
    BadSubject(String),
    #[error("bad property {0:?}")]
    BadProperty(String),
    #[error("bad value {0:?}")]
    BadValue(String),
    #[error("expected {expected} value, found {found:?}")]
    KindMismatch { expected: &'static str, found: String },
    #[error("{0}")]
    Structure(String),
}

/// Subject of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Subject {
    Item(Qid),
    Last,
}

/// A value as it appears in a line; `LAST` may stand for an item value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LineValue {
    Value(Value),
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    Label,
    Description,
    Alias,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Create,
    Term { subject: Subject, kind: TermKind, lang: String, text: String },
    Statement {
        subject: Subject,
        property: Pid,
        value: LineValue,
        qualifiers: Vec<(Pid, LineValue)>,
        sources: Vec<(Pid, LineValue)>,
    },
}

/// Renders a value in V1 syntax. Placeholder items render as `LAST`; the
/// compiler only lets that happen right after the matching `CREATE`.
pub fn render_value(value: &Value) -> String {
    match value {
        Value::Item { item: EntityRef::Resolved(q) } => q.to_string(),
        Value::Item { item: EntityRef::Placeholder(_) } => "LAST".to_string(),
        Value::Quantity(q) => match q.unit() {
            Some(EntityRef::Resolved(u)) => format!("{}U{}", q.amount(), u.number()),
            _ => q.amount().to_string(),
        },
        Value::Time(t) => t.to_string(),
        Value::String { text } => quote(text),
        Value::Monolingual { lang, text } => format!("{lang}:{}", quote(text)),
        Value::Url { url } => quote(url.as_str()),
    }
}

pub fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn unquote(token: &str) -> Option<String> {
    let inner = token.strip_prefix('"')?.strip_suffix('"')?;
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => out.push(chars.next()?),
            '"' => return None,
            c => out.push(c),
        }
    }
    Some(out)
}

static QUANTITY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([+-]?\d+(?:\.\d+)?)(?:U([1-9]\d*))?$").unwrap());
static TIME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([+-])(\d{1,16})-(\d{2})-(\d{2})T00:00:00Z/(\d{1,2})$").unwrap());
static MONOLINGUAL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"^([a-z]{2,3}(?:-[a-z0-9]+)*):(".*")$"#).unwrap());

fn parse_quantity(token: &str) -> Option<Value> {
    let caps = QUANTITY.captures(token)?;
    let amount: Decimal = caps[1].trim_start_matches('+').parse().ok()?;
    let unit = match caps.get(2) {
        Some(m) => Some(EntityRef::Resolved(Qid::new(m.as_str().parse().ok()?).ok()?)),
        None => None,
    };
    Some(Value::quantity(amount, unit))
}

fn parse_time(token: &str) -> Option<Value> {
    let caps = TIME.captures(token)?;
    let mut year: i32 = caps[2].parse().ok()?;
    if &caps[1] == "-" {
        year = -year;
    }
    let precision = caps[5].parse::<u8>().ok()?.try_into().ok()?;
    WikiTime::from_parts(year, caps[3].parse().ok()?, caps[4].parse().ok()?, precision)
        .ok()
        .map(Value::time)
}

fn parse_monolingual(token: &str) -> Option<Value> {
    let caps = MONOLINGUAL.captures(token)?;
    Value::monolingual(&caps[1], unquote(&caps[2])?).ok()
}

/// Parses a value token whose datatype is known (from the property).
pub fn parse_value(token: &str, kind: ValueKind) -> Result<Value, GrammarError> {
    let parsed = match kind {
        ValueKind::Item => token.parse::<Qid>().ok().map(Value::item),
        ValueKind::Quantity => parse_quantity(token),
        ValueKind::Time => parse_time(token),
        ValueKind::String => unquote(token).and_then(|s| Value::string(s).ok()),
        ValueKind::Monolingual => parse_monolingual(token),
        ValueKind::Url => unquote(token).and_then(|s| Value::url(&s).ok()),
    };
    parsed.ok_or_else(|| GrammarError::KindMismatch { expected: kind_name(kind), found: token.to_string() })
}

fn kind_name(kind: ValueKind) -> &'static str {
    match kind {
        ValueKind::Item => "item",
        ValueKind::Quantity => "quantity",
        ValueKind::Time => "time",
        ValueKind::String => "string",
        ValueKind::Monolingual => "monolingual text",
        ValueKind::Url => "url",
    }
}

/// Parses a value token without a datatype hint. Quoted text parses as a
/// plain string (V1 has no distinct URL syntax).
pub fn parse_line_value(token: &str) -> Result<LineValue, GrammarError> {
    if token == "LAST" {
        return Ok(LineValue::Last);
    }
    let v = token
        .parse::<Qid>()
        .ok()
        .map(Value::item)
        .or_else(|| parse_time(token))
        .or_else(|| parse_quantity(token))
        .or_else(|| parse_monolingual(token))
        .or_else(|| unquote(token).and_then(|s| Value::string(s).ok()));
    v.map(LineValue::Value).ok_or_else(|| GrammarError::BadValue(token.to_string()))
}

/// Splits a line into fields on `|` or tab, ignoring separators inside quotes.
pub fn tokenize(line: &str) -> Result<Vec<&str>, GrammarError> {
    let mut fields = Vec::new();
    let mut start = 0;
    let mut in_quotes = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        if in_quotes {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_quotes = false,
                _ => {}
            }
        } else if c == '"' {
            in_quotes = true;
        } else if c == '|' || c == '\t' {
            fields.push(&line[start..i]);
            start = i + 1;
        }
    }
    if in_quotes {
        return Err(GrammarError::UnterminatedString);
    }
    fields.push(&line[start..]);
    Ok(fields)
}

fn parse_subject(token: &str) -> Result<Subject, GrammarError> {
    if token == "LAST" {
        return Ok(Subject::Last);
    }
    token.parse::<Qid>().map(Subject::Item).map_err(|_| GrammarError::BadSubject(token.to_string()))
}

fn parse_pid(token: &str, prefix: char) -> Option<Pid> {
    format!("P{}", token.strip_prefix(prefix)?).parse().ok()
}

/// Parses one command line.
pub fn parse_line(line: &str) -> Result<Command, GrammarError> {
    if line.trim().is_empty() {
        return Err(GrammarError::Empty);
    }
    if line == "CREATE" {
        return Ok(Command::Create);
    }
    let fields = tokenize(line)?;
    if fields.len() < 3 {
        return Err(GrammarError::Structure(format!("expected at least 3 fields, found {}", fields.len())));
    }
    let subject = parse_subject(fields[0])?;
    let second = fields[1];

    let term = match second.chars().next() {
        Some('L') => Some(TermKind::Label),
        Some('D') => Some(TermKind::Description),
        Some('A') => Some(TermKind::Alias),
        _ => None,
    };
    if let Some(kind) = term {
        let lang = &second[1..];
        if fields.len() != 3 || lang.is_empty() || !lang.bytes().all(|b| b.is_ascii_lowercase() || b == b'-') {
            return Err(GrammarError::Structure(format!("bad term command {second:?}")));
        }
        let text = unquote(fields[2]).ok_or_else(|| GrammarError::BadValue(fields[2].to_string()))?;
        return Ok(Command::Term { subject, kind, lang: lang.to_string(), text });
    }

    let property = second.parse::<Pid>().map_err(|_| GrammarError::BadProperty(second.to_string()))?;
    let value = parse_line_value(fields[2])?;
    let rest = &fields[3..];
    if rest.len() % 2 != 0 {
        return Err(GrammarError::Structure("dangling qualifier or source property".into()));
    }
    let mut qualifiers = Vec::new();
    let mut sources = Vec::new();
    for pair in rest.chunks(2) {
        let (key, raw) = (pair[0], pair[1]);
        if let Some(pid) = parse_pid(key, 'S') {
            sources.push((pid, parse_line_value(raw)?));
        } else if let Ok(pid) = key.parse::<Pid>() {
            if !sources.is_empty() {
                return Err(GrammarError::Structure(format!("qualifier {key} after sources")));
            }
            qualifiers.push((pid, parse_line_value(raw)?));
        } else {
            return Err(GrammarError::BadProperty(key.to_string()));
        }
    }
    Ok(Command::Statement { subject, property, value, qualifiers, sources })
}
