//! Statement patterns per logical field and the builder that applies them.

use std::collections::{BTreeMap, BTreeSet};

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use url::Url;

use super::{
    EntityRef, LabelSet, MappingVocabulary, ModelError, Pid, PropertyKey, Statement, Value, WikiTime,
};

/// Kinds of statement the pipeline knows how to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    PcMember,
    Organizer,
    Sponsor,
    Winner,
    Deadline,
    AdmissionRate,
    Submissions,
    AcceptedContributions,
    InstanceOf,
    Title,
    Doi,
    Pages,
    PublicationDate,
    PublishedIn,
    Author,
    AuthorNameString,
    Orcid,
}

impl Field {
    pub const ALL: [Field; 17] = [
        Field::PcMember,
        Field::Organizer,
        Field::Sponsor,
        Field::Winner,
        Field::Deadline,
        Field::AdmissionRate,
        Field::Submissions,
        Field::AcceptedContributions,
        Field::InstanceOf,
        Field::Title,
        Field::Doi,
        Field::Pages,
        Field::PublicationDate,
        Field::PublishedIn,
        Field::Author,
        Field::AuthorNameString,
        Field::Orcid,
    ];

    pub fn property_key(self) -> PropertyKey {
        match self {
            Field::PcMember => PropertyKey::PcMember,
            Field::Organizer => PropertyKey::Organizer,
            Field::Sponsor => PropertyKey::Sponsor,
            Field::Winner => PropertyKey::Winner,
            Field::Deadline => PropertyKey::SignificantEvent,
            Field::AdmissionRate => PropertyKey::AdmissionRate,
            Field::Submissions => PropertyKey::NumberOfSubmissions,
            Field::AcceptedContributions => PropertyKey::NumberOfAcceptedContributions,
            Field::InstanceOf => PropertyKey::InstanceOf,
            Field::Title => PropertyKey::Title,
            Field::Doi => PropertyKey::Doi,
            Field::Pages => PropertyKey::Pages,
            Field::PublicationDate => PropertyKey::PublicationDate,
            Field::PublishedIn => PropertyKey::PublishedIn,
            Field::Author => PropertyKey::Author,
            Field::AuthorNameString => PropertyKey::AuthorNameString,
            Field::Orcid => PropertyKey::Orcid,
        }
    }

    /// The exact qualifier properties a statement of this field carries.
    pub fn qualifier_keys(self) -> &'static [PropertyKey] {
        use PropertyKey::*;
        match self {
            Field::PcMember => &[AppliesToPart, ObjectHasRole],
            Field::Organizer | Field::Sponsor | Field::Winner => &[ObjectHasRole],
            Field::Deadline => &[PointInTime],
            Field::AdmissionRate | Field::Submissions | Field::AcceptedContributions => &[AppliesToPart],
            Field::Author | Field::AuthorNameString => &[SeriesOrdinal],
            _ => &[],
        }
    }

    /// Whether the statement value is the entity a record is about.
    pub fn takes_entity(self) -> bool {
        matches!(
            self,
            Field::PcMember | Field::Organizer | Field::Sponsor | Field::Winner | Field::Author | Field::PublishedIn
        )
    }
}

/// Operands for [`build_statement`]; each field reads the ones it needs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Payload {
    pub item: Option<EntityRef>,
    pub track: Option<String>,
    pub role: Option<String>,
    pub level: Option<String>,
    pub award: Option<String>,
    pub kind: Option<String>,
    pub class: Option<String>,
    pub date: Option<WikiTime>,
    pub amount: Option<Decimal>,
    pub text: Option<String>,
    pub lang: Option<String>,
    pub ordinal: Option<u32>,
}

impl Payload {
    pub fn item(mut self, item: impl Into<EntityRef>) -> Self {
        self.item = Some(item.into());
        self
    }
    pub fn track(mut self, v: impl Into<String>) -> Self {
        self.track = Some(v.into());
        self
    }
    pub fn role(mut self, v: impl Into<String>) -> Self {
        self.role = Some(v.into());
        self
    }
    pub fn level(mut self, v: impl Into<String>) -> Self {
        self.level = Some(v.into());
        self
    }
    pub fn award(mut self, v: impl Into<String>) -> Self {
        self.award = Some(v.into());
        self
    }
    pub fn kind(mut self, v: impl Into<String>) -> Self {
        self.kind = Some(v.into());
        self
    }
    pub fn class(mut self, v: impl Into<String>) -> Self {
        self.class = Some(v.into());
        self
    }
    pub fn date(mut self, v: WikiTime) -> Self {
        self.date = Some(v);
        self
    }
    pub fn amount(mut self, v: Decimal) -> Self {
        self.amount = Some(v);
        self
    }
    pub fn text(mut self, v: impl Into<String>) -> Self {
        self.text = Some(v.into());
        self
    }
    pub fn ordinal(mut self, v: u32) -> Self {
        self.ordinal = Some(v);
        self
    }
}

fn need<'a, T>(field: Field, name: &'static str, v: &'a Option<T>) -> Result<&'a T, ModelError> {
    v.as_ref().ok_or(ModelError::MissingQualifierOperand { field, operand: name })
}

fn label(
    vocab: &MappingVocabulary,
    set: LabelSet,
    field: Field,
    name: &'static str,
    raw: &Option<String>,
) -> Result<Value, ModelError> {
    let raw = need(field, name, raw)?;
    vocab
        .lookup(set, raw)
        .map(|e| Value::item(e.clone()))
        .ok_or_else(|| ModelError::UnknownLabel { set: set.name(), label: raw.clone() })
}

fn bound(vocab: &MappingVocabulary, field: Field, key: PropertyKey) -> Result<Pid, ModelError> {
    vocab.property(key).ok_or(ModelError::UnboundField { field, key })
}

/// Builds the statement for `field` with exactly the qualifier pattern that
/// field carries, plus one reference-URL reference pointing at `source_url`.
pub fn build_statement(
    subject: &EntityRef,
    field: Field,
    payload: &Payload,
    vocab: &MappingVocabulary,
    source_url: &Url,
) -> Result<Statement, ModelError> {
    let property = bound(vocab, field, field.property_key())?;
    let reference = bound(vocab, field, PropertyKey::ReferenceUrl)?;
    let mut qualifier_pids = BTreeMap::new();
    for key in field.qualifier_keys() {
        qualifier_pids.insert(*key, bound(vocab, field, *key)?);
    }
    let q = |key: PropertyKey| qualifier_pids[&key];

    let entity = || need(field, "item", &payload.item).map(|e| Value::item(e.clone()));
    let text = || need(field, "text", &payload.text).map(String::as_str);

    let (value, qualifiers) = match field {
        Field::PcMember => (
            entity()?,
            vec![
                (q(PropertyKey::AppliesToPart), label(vocab, LabelSet::Track, field, "track", &payload.track)?),
                (q(PropertyKey::ObjectHasRole), label(vocab, LabelSet::Role, field, "role", &payload.role)?),
            ],
        ),
        Field::Organizer => (
            entity()?,
            vec![(q(PropertyKey::ObjectHasRole), label(vocab, LabelSet::Role, field, "role", &payload.role)?)],
        ),
        Field::Sponsor => (
            entity()?,
            vec![(
                q(PropertyKey::ObjectHasRole),
                label(vocab, LabelSet::SponsorLevel, field, "level", &payload.level)?,
            )],
        ),
        Field::Winner => (
            entity()?,
            vec![(q(PropertyKey::ObjectHasRole), label(vocab, LabelSet::Award, field, "award", &payload.award)?)],
        ),
        Field::Deadline => (
            label(vocab, LabelSet::Deadline, field, "kind", &payload.kind)?,
            vec![(q(PropertyKey::PointInTime), Value::time(*need(field, "date", &payload.date)?))],
        ),
        Field::AdmissionRate | Field::Submissions | Field::AcceptedContributions => {
            let unit = match field {
                Field::AdmissionRate => vocab.percent_unit().cloned(),
                _ => None,
            };
            (
                Value::quantity(*need(field, "amount", &payload.amount)?, unit),
                vec![(
                    q(PropertyKey::AppliesToPart),
                    label(vocab, LabelSet::Track, field, "track", &payload.track)?,
                )],
            )
        }
        Field::InstanceOf => (label(vocab, LabelSet::Class, field, "class", &payload.class)?, vec![]),
        Field::Title => {
            let lang = payload.lang.as_deref().unwrap_or("en");
            (Value::monolingual(lang, text()?)?, vec![])
        }
        Field::Doi | Field::Pages | Field::Orcid => (Value::string(text()?)?, vec![]),
        Field::PublicationDate => (Value::time(*need(field, "date", &payload.date)?), vec![]),
        Field::PublishedIn => (entity()?, vec![]),
        Field::Author | Field::AuthorNameString => {
            let value = if field == Field::Author { entity()? } else { Value::string(text()?)? };
            let ordinal = need(field, "ordinal", &payload.ordinal)?;
            (value, vec![(q(PropertyKey::SeriesOrdinal), Value::string(ordinal.to_string())?)])
        }
    };

    Statement::new(
        subject.clone(),
        property,
        value,
        qualifiers,
        vec![(reference, Value::Url { url: source_url.clone() })],
    )
}

/// Allowed qualifier property sets per main property, derived from every
/// bound field. A property absent from the map admits no qualifiers.
pub fn qualifier_patterns(vocab: &MappingVocabulary) -> BTreeMap<Pid, BTreeSet<Pid>> {
    let mut out: BTreeMap<Pid, BTreeSet<Pid>> = BTreeMap::new();
    for field in Field::ALL {
        let Some(main) = vocab.property(field.property_key()) else { continue };
        let quals: Option<BTreeSet<Pid>> =
            field.qualifier_keys().iter().map(|k| vocab.property(*k)).collect();
        if let Some(quals) = quals {
            out.entry(main).or_default().extend(quals);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn vocab() -> MappingVocabulary {
        MappingVocabulary::builtin()
    }

    fn iswc() -> EntityRef {
        EntityRef::parse("Q119153957").unwrap()
    }

    fn url() -> Url {
        Url::parse("https://iswc2023.semanticweb.org/").unwrap()
    }

    fn pids(s: &Statement) -> Vec<String> {
        s.qualifiers().iter().map(|(p, _)| p.to_string()).collect()
    }

    #[test]
    fn pc_member_pattern() {
        let v = vocab();
        let person = EntityRef::parse("Q42").unwrap();
        let payload = Payload::default().item(person.clone()).track("research").role("SPC");
        let s = build_statement(&iswc(), Field::PcMember, &payload, &v, &url()).unwrap();
        assert_eq!(s.property().to_string(), "P5804");
        assert_eq!(s.value(), &Value::item(person));
        assert_eq!(pids(&s), ["P518", "P3831"]);
        assert_eq!(s.qualifiers()[0].1.as_item(), v.lookup(LabelSet::Track, "research"));
        assert_eq!(s.qualifiers()[1].1.as_item(), v.lookup(LabelSet::Role, "spc"));
        assert_eq!(s.references().len(), 1);
        assert_eq!(s.references()[0].0.to_string(), "P854");
    }

    #[test]
    fn deadline_pattern() {
        let date = WikiTime::day(NaiveDate::from_ymd_opt(2023, 5, 9).unwrap());
        let payload = Payload::default().kind("paper submission").date(date);
        let s = build_statement(&iswc(), Field::Deadline, &payload, &vocab(), &url()).unwrap();
        assert_eq!(s.property().to_string(), "P793");
        assert_eq!(s.value().as_item(), vocab().lookup(LabelSet::Deadline, "paper submission deadline"));
        assert_eq!(pids(&s), ["P585"]);
        assert_eq!(s.qualifiers()[0].1, Value::time(date));
    }

    #[test]
    fn sponsor_pattern() {
        let org = EntityRef::parse("Q95").unwrap();
        let payload = Payload::default().item(org).level("gold sponsor");
        let s = build_statement(&iswc(), Field::Sponsor, &payload, &vocab(), &url()).unwrap();
        assert_eq!(s.property().to_string(), "P859");
        assert_eq!(pids(&s), ["P3831"]);
    }

    #[test]
    fn admission_rate_uses_percent_unit() {
        let payload = Payload::default().amount("19.4".parse().unwrap()).track("Research Track");
        let s = build_statement(&iswc(), Field::AdmissionRate, &payload, &vocab(), &url()).unwrap();
        match s.value() {
            Value::Quantity(q) => assert_eq!(q.unit().unwrap().to_string(), "Q11229"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(pids(&s), ["P518"]);
    }

    #[test]
    fn unbound_field() {
        let payload = Payload::default().amount(Decimal::from(98)).track("research");
        let err = build_statement(&iswc(), Field::Submissions, &payload, &vocab(), &url()).unwrap_err();
        assert!(matches!(err, ModelError::UnboundField { field: Field::Submissions, .. }));
    }

    #[test]
    fn missing_operand() {
        let payload = Payload::default().item(EntityRef::parse("Q42").unwrap()).track("research");
        let err = build_statement(&iswc(), Field::PcMember, &payload, &vocab(), &url()).unwrap_err();
        assert!(matches!(err, ModelError::MissingQualifierOperand { operand: "role", .. }));
    }

    #[test]
    fn patterns_cover_table_rows() {
        let p = qualifier_patterns(&vocab());
        let get = |pid: &str| {
            p.get(&pid.parse::<Pid>().unwrap())
                .map(|s| s.iter().map(|x| x.to_string()).collect::<Vec<_>>())
                .unwrap_or_default()
        };
        assert_eq!(get("P5804"), ["P518", "P3831"]);
        assert_eq!(get("P793"), ["P585"]);
        assert_eq!(get("P664"), ["P3831"]);
        assert_eq!(get("P859"), ["P3831"]);
        assert_eq!(get("P1346"), ["P3831"]);
        assert_eq!(get("P5822"), ["P518"]);
        assert!(get("P31").is_empty());
    }
}
