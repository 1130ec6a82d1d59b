use std::fmt;

use chrono::{Datelike, NaiveDate};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use url::Url;

use super::{EntityRef, ModelError};

/// Time precision codes as used by Wikibase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum TimePrecision {
    Year = 9,
    Month = 10,
    Day = 11,
}

impl TryFrom<u8> for TimePrecision {
    type Error = ModelError;

    fn try_from(code: u8) -> Result<Self, Self::Error> {
        match code {
            9 => Ok(TimePrecision::Year),
            10 => Ok(TimePrecision::Month),
            11 => Ok(TimePrecision::Day),
            other => Err(ModelError::InvalidValue(format!("unsupported time precision {other}"))),
        }
    }
}

impl From<TimePrecision> for u8 {
    fn from(p: TimePrecision) -> u8 {
        p as u8
    }
}

/// A calendar date at year, month or day precision. Components below the
/// precision are zero, mirroring the Wikibase canonical form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WikiTime {
    year: i32,
    month: u8,
    day: u8,
    precision: TimePrecision,
}

impl WikiTime {
    pub fn day(date: NaiveDate) -> Self {
        WikiTime {
            year: date.year(),
            month: date.month() as u8,
            day: date.day() as u8,
            precision: TimePrecision::Day,
        }
    }

    pub fn month(year: i32, month: u8) -> Result<Self, ModelError> {
        if !(1..=12).contains(&month) {
            return Err(ModelError::InvalidValue(format!("month {month} out of range")));
        }
        Ok(WikiTime { year, month, day: 0, precision: TimePrecision::Month })
    }

    pub fn year(year: i32) -> Self {
        WikiTime { year, month: 0, day: 0, precision: TimePrecision::Year }
    }

    /// Builds a time from raw components, checking they agree with the precision.
    pub fn from_parts(year: i32, month: u8, day: u8, precision: TimePrecision) -> Result<Self, ModelError> {
        match precision {
            TimePrecision::Year if month == 0 && day == 0 => Ok(Self::year(year)),
            TimePrecision::Month if day == 0 => Self::month(year, month),
            TimePrecision::Day => NaiveDate::from_ymd_opt(year, month.into(), day.into())
                .map(Self::day)
                .ok_or_else(|| ModelError::InvalidValue(format!("invalid date {year}-{month}-{day}"))),
            _ => Err(ModelError::InvalidValue(format!(
                "components {year}-{month}-{day} do not match precision {}",
                precision as u8
            ))),
        }
    }

    /// Parses `YYYY-MM-DD`, `YYYY-MM` or `YYYY`, picking the precision from
    /// the number of components.
    pub fn parse_iso(raw: &str) -> Result<Self, ModelError> {
        let bad = || ModelError::InvalidValue(format!("not an ISO date: {raw:?}"));
        let parts: Vec<&str> = raw.trim().split('-').collect();
        let num = |s: &str, width: usize| -> Result<u32, ModelError> {
            if s.len() == width && s.bytes().all(|b| b.is_ascii_digit()) { s.parse().map_err(|_| bad()) } else { Err(bad()) }
        };
        let year = num(parts[0], 4)? as i32;
        match parts.len() {
            1 => Ok(Self::year(year)),
            2 => Self::month(year, num(parts[1], 2)? as u8),
            3 => Self::from_parts(year, num(parts[1], 2)? as u8, num(parts[2], 2)? as u8, TimePrecision::Day),
            _ => Err(bad()),
        }
    }

    pub fn year_part(&self) -> i32 {
        self.year
    }

    pub fn month_part(&self) -> u8 {
        self.month
    }

    pub fn day_part(&self) -> u8 {
        self.day
    }

    pub fn precision(&self) -> TimePrecision {
        self.precision
    }

    pub fn as_date(&self) -> Option<NaiveDate> {
        match self.precision {
            TimePrecision::Day => NaiveDate::from_ymd_opt(self.year, self.month.into(), self.day.into()),
            _ => None,
        }
    }
}

impl fmt::Display for WikiTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.year < 0 { '-' } else { '+' };
        write!(
            f,
            "{sign}{:04}-{:02}-{:02}T00:00:00Z/{}",
            self.year.unsigned_abs(),
            self.month,
            self.day,
            self.precision as u8
        )
    }
}

/// Numeric amount with an optional unit item.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Quantity {
    amount: Decimal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unit: Option<EntityRef>,
}

impl Quantity {
    pub fn new(amount: Decimal, unit: Option<EntityRef>) -> Self {
        Quantity { amount: canonical_decimal(amount), unit }
    }

    pub fn amount(&self) -> Decimal {
        self.amount
    }

    pub fn unit(&self) -> Option<&EntityRef> {
        self.unit.as_ref()
    }
}

pub(crate) fn canonical_decimal(d: Decimal) -> Decimal {
    if d.is_zero() {
        Decimal::ZERO
    } else {
        d.normalize()
    }
}

/// Coarse datatype of a value, used to disambiguate parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Item,
    Quantity,
    Time,
    String,
    Monolingual,
    Url,
}

/// A statement, qualifier or reference value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Value {
    Item { item: EntityRef },
    Quantity(Quantity),
    Time(WikiTime),
    String { text: String },
    Monolingual { lang: String, text: String },
    Url { url: Url },
}

impl Value {
    pub fn item(item: impl Into<EntityRef>) -> Self {
        Value::Item { item: item.into() }
    }

    pub fn quantity(amount: Decimal, unit: Option<EntityRef>) -> Self {
        Value::Quantity(Quantity::new(amount, unit))
    }

    pub fn time(t: WikiTime) -> Self {
        Value::Time(t)
    }

    pub fn string(text: impl Into<String>) -> Result<Self, ModelError> {
        let text = text.into();
        check_text(&text)?;
        Ok(Value::String { text })
    }

    pub fn monolingual(lang: impl Into<String>, text: impl Into<String>) -> Result<Self, ModelError> {
        let (lang, text) = (lang.into(), text.into());
        check_lang(&lang)?;
        check_text(&text)?;
        Ok(Value::Monolingual { lang, text })
    }

    pub fn url(raw: &str) -> Result<Self, ModelError> {
        let url = Url::parse(raw).map_err(|e| ModelError::InvalidValue(format!("{raw}: {e}")))?;
        if url.cannot_be_a_base() {
            return Err(ModelError::InvalidValue(format!("{raw}: not an absolute URL")));
        }
        check_text(url.as_str())?;
        Ok(Value::Url { url })
    }

    pub fn kind(&self) -> ValueKind {
        match self {
            Value::Item { .. } => ValueKind::Item,
            Value::Quantity(_) => ValueKind::Quantity,
            Value::Time(_) => ValueKind::Time,
            Value::String { .. } => ValueKind::String,
            Value::Monolingual { .. } => ValueKind::Monolingual,
            Value::Url { .. } => ValueKind::Url,
        }
    }

    pub fn as_item(&self) -> Option<&EntityRef> {
        match self {
            Value::Item { item } => Some(item),
            _ => None,
        }
    }

    /// Re-checks the invariants that constructors enforce; needed for values
    /// built directly from the public variants or deserialized.
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            Value::String { text } => check_text(text),
            Value::Monolingual { lang, text } => check_lang(lang).and_then(|_| check_text(text)),
            Value::Url { url } if url.cannot_be_a_base() => {
                Err(ModelError::InvalidValue(format!("{url}: not an absolute URL")))
            }
            Value::Url { url } => check_text(url.as_str()),
            Value::Time(t) => WikiTime::from_parts(t.year, t.month, t.day, t.precision).map(|_| ()),
            Value::Item { .. } | Value::Quantity(_) => Ok(()),
        }
    }
}

fn check_text(text: &str) -> Result<(), ModelError> {
    if text.chars().any(char::is_control) {
        return Err(ModelError::InvalidValue(format!("control character in {text:?}")));
    }
    Ok(())
}

fn check_lang(lang: &str) -> Result<(), ModelError> {
    let mut parts = lang.split('-');
    let primary = parts.next().unwrap_or_default();
    let ok = (2..=3).contains(&primary.len())
        && primary.bytes().all(|b| b.is_ascii_lowercase())
        && parts.all(|p| !p.is_empty() && p.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit()));
    if ok {
        Ok(())
    } else {
        Err(ModelError::InvalidValue(format!("invalid language tag {lang:?}")))
    }
}
