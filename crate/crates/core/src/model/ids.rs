//! Wikidata item and property identifiers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ModelError;

/// A Wikidata item id such as `Q119153957`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Qid(u64);

/// A Wikidata property id such as `P5804`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pid(u64);

fn parse_prefixed(raw: &str, prefix: char) -> Option<u64> {
    let digits = raw.strip_prefix(prefix)?;
    if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

impl Qid {
    pub fn new(n: u64) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::MalformedIdentifier("Q0".into()));
        }
        Ok(Qid(n))
    }

    pub fn number(self) -> u64 {
        self.0
    }
}

impl Pid {
    pub fn new(n: u64) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::MalformedIdentifier("P0".into()));
        }
        Ok(Pid(n))
    }

    pub fn number(self) -> u64 {
        self.0
    }
}

impl FromStr for Qid {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_prefixed(s, 'Q')
            .map(Qid)
            .ok_or_else(|| ModelError::MalformedIdentifier(s.to_string()))
    }
}

impl FromStr for Pid {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_prefixed(s, 'P')
            .map(Pid)
            .ok_or_else(|| ModelError::MalformedIdentifier(s.to_string()))
    }
}

impl fmt::Display for Qid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}", self.0)
    }
}

impl fmt::Display for Pid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

/// Reference to an item: either an existing Wikidata item or a local
/// placeholder for an item that does not exist yet.
///
/// Serialized as a plain string: `Q42` or `_:local-id`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityRef {
    Resolved(Qid),
    Placeholder(String),
}

const PLACEHOLDER_PREFIX: &str = "_:";

impl EntityRef {
    pub fn placeholder(local_id: impl Into<String>) -> Result<Self, ModelError> {
        let local_id = local_id.into();
        if local_id.is_empty()
            || local_id
                .chars()
                .any(|c| c.is_whitespace() || c.is_control() || c == '|' || c == '"')
        {
            return Err(ModelError::MalformedIdentifier(local_id));
        }
        Ok(EntityRef::Placeholder(local_id))
    }

    pub fn qid(&self) -> Option<Qid> {
        match self {
            EntityRef::Resolved(q) => Some(*q),
            EntityRef::Placeholder(_) => None,
        }
    }

    pub fn local_id(&self) -> Option<&str> {
        match self {
            EntityRef::Resolved(_) => None,
            EntityRef::Placeholder(id) => Some(id),
        }
    }

    pub fn is_resolved(&self) -> bool {
        matches!(self, EntityRef::Resolved(_))
    }

    /// Parses the serialized form (`Q…` or `_:…`).
    pub fn parse(raw: &str) -> Result<Self, ModelError> {
        match raw.strip_prefix(PLACEHOLDER_PREFIX) {
            Some(local) => EntityRef::placeholder(local),
            None => validate_entity_ref(raw),
        }
    }
}

impl From<Qid> for EntityRef {
    fn from(q: Qid) -> Self {
        EntityRef::Resolved(q)
    }
}

impl fmt::Display for EntityRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityRef::Resolved(q) => q.fmt(f),
            EntityRef::Placeholder(id) => write!(f, "{PLACEHOLDER_PREFIX}{id}"),
        }
    }
}

/// Validates a raw item identifier and returns a resolved reference.
pub fn validate_entity_ref(raw: &str) -> Result<EntityRef, ModelError> {
    raw.parse::<Qid>().map(EntityRef::Resolved)
}

macro_rules! string_serde {
    ($ty:ty, $parse:expr) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(d)?;
                $parse(&raw).map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(Qid, |s: &str| s.parse::<Qid>());
string_serde!(Pid, |s: &str| s.parse::<Pid>());
string_serde!(EntityRef, EntityRef::parse);

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn accepts_conference_item() {
        let r = validate_entity_ref("Q119153957").unwrap();
        assert_eq!(r, EntityRef::Resolved(Qid(119153957)));
        assert_eq!(r.to_string(), "Q119153957");
    }

    #[test]
    fn rejects_property_where_item_expected() {
        assert!(matches!(
            validate_entity_ref("P5804"),
            Err(ModelError::MalformedIdentifier(s)) if s == "P5804"
        ));
    }

    #[test]
    fn rejects_zero_and_leading_zero() {
        for raw in ["Q0", "Q012", "Q", "", "q5", "Q5 ", "Q-1", "Q99999999999999999999999"] {
            assert!(validate_entity_ref(raw).is_err(), "{raw:?} should be rejected");
        }
    }

    #[test]
    fn placeholder_serde() {
        let r: EntityRef = serde_json::from_str("\"_:person-1\"").unwrap();
        assert_eq!(r.local_id(), Some("person-1"));
        assert_eq!(serde_json::to_string(&r).unwrap(), "\"_:person-1\"");
        assert!(serde_json::from_str::<EntityRef>("\"_:\"").is_err());
    }

    proptest! {
        #[test]
        fn qid_round_trip(n in 1u64..u64::MAX) {
            let q = Qid(n);
            prop_assert_eq!(validate_entity_ref(&q.to_string()).unwrap(), EntityRef::Resolved(q));
        }
    }
}
