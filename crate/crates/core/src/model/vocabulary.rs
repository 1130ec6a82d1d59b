//! Declarative mapping vocabulary: property bindings and the qualifier
//! entities used for roles, tracks, sponsorship levels, awards and deadlines.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EntityRef, ModelError, Pid};

/// Logical property names that a vocabulary binds to Wikidata properties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyKey {
    PcMember,
    Organizer,
    Sponsor,
    Winner,
    SignificantEvent,
    PointInTime,
    AppliesToPart,
    ObjectHasRole,
    AdmissionRate,
    NumberOfSubmissions,
    NumberOfAcceptedContributions,
    ReferenceUrl,
    InstanceOf,
    Title,
    Doi,
    Pages,
    PublicationDate,
    PublishedIn,
    Author,
    AuthorNameString,
    SeriesOrdinal,
    Orcid,
}

/// The four deadline kinds every vocabulary must define.
pub const REQUIRED_DEADLINES: [&str; 4] = [
    "abstract submission",
    "paper submission",
    "acceptance notification",
    "camera-ready submission",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabelSet {
    Role,
    Track,
    SponsorLevel,
    Award,
    Deadline,
    Class,
}

impl LabelSet {
    pub fn name(self) -> &'static str {
        match self {
            LabelSet::Role => "role",
            LabelSet::Track => "track",
            LabelSet::SponsorLevel => "sponsor level",
            LabelSet::Award => "award",
            LabelSet::Deadline => "deadline kind",
            LabelSet::Class => "class",
        }
    }

    pub fn normalize(self, label: &str) -> String {
        match self {
            LabelSet::Track => normalize_track(label),
            LabelSet::Deadline => {
                let l = normalize_label(label);
                l.strip_suffix(" deadline").map(str::to_string).unwrap_or(l)
            }
            _ => normalize_label(label),
        }
    }
}

/// Lowercases and collapses whitespace.
pub fn normalize_label(label: &str) -> String {
    label.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Track labels: lowercase, trailing "track" dropped, resource/resources folded.
pub fn normalize_track(label: &str) -> String {
    let mut l = normalize_label(label);
    if let Some(stripped) = l.strip_suffix("track") {
        l = stripped.trim_end().to_string();
    }
    l.split(' ')
        .map(|w| if w == "resources" { "resource" } else { w })
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVocabulary {
    properties: BTreeMap<PropertyKey, Pid>,
    roles: BTreeMap<String, EntityRef>,
    tracks: BTreeMap<String, EntityRef>,
    sponsor_levels: BTreeMap<String, EntityRef>,
    awards: BTreeMap<String, EntityRef>,
    deadlines: BTreeMap<String, EntityRef>,
    #[serde(default)]
    classes: BTreeMap<String, EntityRef>,
    #[serde(default)]
    percent_unit: Option<EntityRef>,
}

/// Immutable vocabulary; labels are stored normalized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MappingVocabulary {
    properties: BTreeMap<PropertyKey, Pid>,
    roles: BTreeMap<String, EntityRef>,
    tracks: BTreeMap<String, EntityRef>,
    sponsor_levels: BTreeMap<String, EntityRef>,
    awards: BTreeMap<String, EntityRef>,
    deadlines: BTreeMap<String, EntityRef>,
    classes: BTreeMap<String, EntityRef>,
    percent_unit: Option<EntityRef>,
}

/// The vocabulary shipped with the crate (`config/vocabulary.json`).
pub const DEFAULT_VOCABULARY_JSON: &str = include_str!("../../config/vocabulary.json");

impl MappingVocabulary {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let raw: RawVocabulary =
            serde_json::from_str(text).map_err(|e| ModelError::Vocabulary(e.to_string()))?;
        let vocab = MappingVocabulary {
            properties: raw.properties,
            roles: normalize_map(LabelSet::Role, raw.roles)?,
            tracks: normalize_map(LabelSet::Track, raw.tracks)?,
            sponsor_levels: normalize_map(LabelSet::SponsorLevel, raw.sponsor_levels)?,
            awards: normalize_map(LabelSet::Award, raw.awards)?,
            deadlines: normalize_map(LabelSet::Deadline, raw.deadlines)?,
            classes: normalize_map(LabelSet::Class, raw.classes)?,
            percent_unit: raw.percent_unit,
        };
        for kind in REQUIRED_DEADLINES {
            if !vocab.deadlines.contains_key(kind) {
                return Err(ModelError::Vocabulary(format!("missing deadline kind {kind:?}")));
            }
        }
        Ok(vocab)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Vocabulary(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_VOCABULARY_JSON).expect("bundled vocabulary is valid")
    }

    pub fn property(&self, key: PropertyKey) -> Option<Pid> {
        self.properties.get(&key).copied()
    }

    pub fn properties(&self) -> impl Iterator<Item = (PropertyKey, Pid)> + '_ {
        self.properties.iter().map(|(k, v)| (*k, *v))
    }

    pub fn percent_unit(&self) -> Option<&EntityRef> {
        self.percent_unit.as_ref()
    }

    fn set(&self, set: LabelSet) -> &BTreeMap<String, EntityRef> {
        match set {
            LabelSet::Role => &self.roles,
            LabelSet::Track => &self.tracks,
            LabelSet::SponsorLevel => &self.sponsor_levels,
            LabelSet::Award => &self.awards,
            LabelSet::Deadline => &self.deadlines,
            LabelSet::Class => &self.classes,
        }
    }

    /// Looks up a label after applying the set's normalization.
    pub fn lookup(&self, set: LabelSet, label: &str) -> Option<&EntityRef> {
        self.set(set).get(&set.normalize(label))
    }

    pub fn labels(&self, set: LabelSet) -> impl Iterator<Item = (&str, &EntityRef)> {
        self.set(set).iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Every entity the vocabulary refers to.
    pub fn entities(&self) -> impl Iterator<Item = &EntityRef> {
        [&self.roles, &self.tracks, &self.sponsor_levels, &self.awards, &self.deadlines, &self.classes]
            .into_iter()
            .flat_map(|m| m.values())
            .chain(self.percent_unit.iter())
    }
}

fn normalize_map(
    set: LabelSet,
    raw: BTreeMap<String, EntityRef>,
) -> Result<BTreeMap<String, EntityRef>, ModelError> {
    let mut out = BTreeMap::new();
    for (label, entity) in raw {
        let key = set.normalize(&label);
        if key.is_empty() {
            return Err(ModelError::Vocabulary(format!("empty {} label", set.name())));
        }
        if let Some(prev) = out.insert(key.clone(), entity.clone()) {
            if prev != entity {
                return Err(ModelError::Vocabulary(format!(
                    "{} label {key:?} maps to both {prev} and {entity}",
                    set.name()
                )));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_vocabulary_loads() {
        let v = MappingVocabulary::builtin();
        assert_eq!(v.property(PropertyKey::PcMember).unwrap().to_string(), "P5804");
        assert_eq!(v.property(PropertyKey::AdmissionRate).unwrap().to_string(), "P5822");
        assert!(v.property(PropertyKey::NumberOfSubmissions).is_none());
        for kind in REQUIRED_DEADLINES {
            assert!(v.lookup(LabelSet::Deadline, kind).is_some());
        }
        assert!(v.lookup(LabelSet::Deadline, "Paper Submission Deadline").is_some());
    }

    #[test]
    fn track_folding() {
        assert_eq!(normalize_track("Resources Track"), "resource");
        assert_eq!(normalize_track("resource"), "resource");
        assert_eq!(normalize_track(" Research  track "), "research");
        assert_eq!(normalize_track("In-Use Track"), "in-use");
        assert_eq!(normalize_track("Posters and Demos Track"), "posters and demos");
    }

    #[test]
    fn unknown_section_is_load_error() {
        let mut json: serde_json::Value = serde_json::from_str(DEFAULT_VOCABULARY_JSON).unwrap();
        json["venues"] = serde_json::json!({});
        assert!(MappingVocabulary::from_json(&json.to_string()).is_err());
    }

    #[test]
    fn unknown_property_key_is_load_error() {
        let mut json: serde_json::Value = serde_json::from_str(DEFAULT_VOCABULARY_JSON).unwrap();
        json["properties"]["colour"] = serde_json::json!("P462");
        assert!(MappingVocabulary::from_json(&json.to_string()).is_err());
    }

    #[test]
    fn missing_deadline_kind_is_load_error() {
        let mut json: serde_json::Value = serde_json::from_str(DEFAULT_VOCABULARY_JSON).unwrap();
        json["deadlines"].as_object_mut().unwrap().retain(|k, _| !k.starts_with("camera"));
        assert!(MappingVocabulary::from_json(&json.to_string()).is_err());
    }

    #[test]
    fn conflicting_labels_after_normalization() {
        let mut json: serde_json::Value = serde_json::from_str(DEFAULT_VOCABULARY_JSON).unwrap();
        json["tracks"]["Resources Track"] = serde_json::json!("Q1");
        json["tracks"]["resource"] = serde_json::json!("Q2");
        assert!(MappingVocabulary::from_json(&json.to_string()).is_err());
    }
}
