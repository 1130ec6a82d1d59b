//! Record → batch compilation.
//!
//! Output order: statements on existing items first, sorted by subject,
//! property and rendered value; then one `CREATE` group per new entity,
//! ordered by placeholder id. A group holds the labels, the class
//! statement, statements about the new entity (subject `LAST`) and
//! statements on existing items that point at it (value `LAST`).

use std::collections::{BTreeMap, BTreeSet};

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use url::Url;

use crate::model::{
    admission_rate, build_statement, EntityRef, Field, LabelSet, MappingVocabulary, Payload, Statement, TrackStats,
    Value, WikiTime,
};
use crate::records::{ExtractionRecord, ReviewState, Task};

use super::grammar::{quote, render_value};
use super::schema::{ColumnBinding, Derive, MappingSchema, Slot, SubjectSource};

#[derive(Debug, thiserror::Error)]
pub enum CompileError {
    #[error("record {id} cannot be compiled: {reason}")]
    UnresolvedRecord { id: String, reason: String },
    #[error("column {column:?} missing for task {task}")]
    SchemaColumnMissing { task: Task, column: String },
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
    #[error("invalid schema: {0}")]
    Schema(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchStats {
    pub creates: usize,
    pub statements: usize,
    pub qualifiers: usize,
    pub references: usize,
    /// Statements not emitted because a cell they need is absent.
    pub skipped: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QsBatch {
    pub lines: Vec<String>,
    pub stats: BatchStats,
}

impl QsBatch {
    /// File contents: one command per line, LF endings, trailing newline.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }
}

/// Label and class for an entity the batch creates.
#[derive(Debug, Default)]
struct Intro {
    labels: BTreeMap<String, String>,
    class: Option<EntityRef>,
    source: Option<Url>,
}

struct Ctx<'a> {
    vocab: &'a MappingVocabulary,
    records: &'a [&'a ExtractionRecord],
    statements: Vec<Statement>,
    intros: BTreeMap<EntityRef, Intro>,
    skipped: usize,
}

fn cell<'r>(record: &'r ExtractionRecord, task: Task, column: &str) -> Result<Option<&'r str>, CompileError> {
    let row = record.effective_row();
    match row.get(column) {
        Some(v) => Ok(v.as_deref().map(str::trim).filter(|s| !s.is_empty())),
        None => Err(CompileError::SchemaColumnMissing { task, column: column.to_string() }),
    }
}

fn violation(record: &ExtractionRecord, msg: impl std::fmt::Display) -> CompileError {
    CompileError::ConstraintViolation(format!("record {}: {msg}", record.id))
}

fn fill(payload: &mut Payload, slot: Slot, raw: &str, record: &ExtractionRecord) -> Result<(), CompileError> {
    let s = raw.to_string();
    match slot {
        Slot::Item => payload.item = Some(EntityRef::parse(raw).map_err(|e| violation(record, e))?),
        Slot::Track => payload.track = Some(s),
        Slot::Role => payload.role = Some(s),
        Slot::Level => payload.level = Some(s),
        Slot::Award => payload.award = Some(s),
        Slot::Kind => payload.kind = Some(s),
        Slot::Class => payload.class = Some(s),
        Slot::Text => payload.text = Some(s),
        Slot::Lang => payload.lang = Some(s),
        Slot::Date => payload.date = Some(WikiTime::parse_iso(raw).map_err(|e| violation(record, e))?),
        Slot::Amount => {
            payload.amount = Some(raw.replace(',', "").parse::<Decimal>().map_err(|e| violation(record, e))?)
        }
        Slot::Ordinal => payload.ordinal = Some(raw.parse().map_err(|e| violation(record, e))?),
    }
    Ok(())
}

fn unresolved(record: &ExtractionRecord, reason: impl Into<String>) -> CompileError {
    CompileError::UnresolvedRecord { id: record.id.clone(), reason: reason.into() }
}

impl Ctx<'_> {
    fn linked(&self, conference: &str, task: Task, key_column: &str, value: &str) -> Option<EntityRef> {
        self.records
            .iter()
            .filter(|r| r.task == task && r.conference_key == conference)
            .find(|r| r.cell(key_column) == Some(value))
            .and_then(|r| r.entity.clone())
    }

    fn subject(&self, schema: &MappingSchema, b: &ColumnBinding, r: &ExtractionRecord) -> Result<Option<EntityRef>, CompileError> {
        match &b.subject {
            SubjectSource::Conference => schema
                .subjects
                .get(&r.conference_key)
                .cloned()
                .map(Some)
                .ok_or_else(|| unresolved(r, format!("no subject entity for conference {:?}", r.conference_key))),
            SubjectSource::Entity => r.entity.clone().map(Some).ok_or_else(|| unresolved(r, "record has no entity")),
            SubjectSource::Linked { task, key_column, via_column } => {
                let Some(via) = cell(r, b.task, via_column)? else { return Ok(None) };
                self.linked(&r.conference_key, *task, key_column, via)
                    .map(Some)
                    .ok_or_else(|| unresolved(r, format!("no {task} record with {key_column} = {via:?}")))
            }
        }
    }

    fn note_intro(
        &mut self,
        schema: &MappingSchema,
        b: &ColumnBinding,
        r: &ExtractionRecord,
        entity: &EntityRef,
    ) -> Result<(), CompileError> {
        if entity.is_resolved() || r.entity.as_ref() != Some(entity) {
            return Ok(());
        }
        let class = match &b.new_entity_class {
            Some(label) => Some(
                self.vocab
                    .lookup(LabelSet::Class, label)
                    .cloned()
                    .ok_or_else(|| violation(r, format!("unknown class {label:?}")))?,
            ),
            None => None,
        };
        let bindings = b.label_bindings.as_ref().unwrap_or(&schema.label_bindings);
        let mut labels = BTreeMap::new();
        for (lang, col) in bindings {
            if let Some(text) = cell(r, b.task, col)? {
                labels.insert(lang.clone(), text.to_string());
            }
        }
        let intro = self.intros.entry(entity.clone()).or_default();
        for (lang, text) in labels {
            intro.labels.entry(lang).or_insert(text);
        }
        if intro.class.is_none() {
            intro.class = class;
        }
        if intro.source.is_none() {
            intro.source = Some(r.source_url.clone());
        }
        Ok(())
    }

    fn bind(&mut self, schema: &MappingSchema, b: &ColumnBinding, r: &ExtractionRecord) -> Result<(), CompileError> {
        let Some(subject) = self.subject(schema, b, r)? else {
            self.skipped += 1;
            return Ok(());
        };
        let mut payload = Payload::default();
        if b.field.takes_entity() && !b.operands.contains_key(&Slot::Item) && !b.constants.contains_key(&Slot::Item) {
            payload.item = Some(r.entity.clone().ok_or_else(|| unresolved(r, "record has no entity"))?);
        }
        for (slot, col) in &b.operands {
            match cell(r, b.task, col)? {
                Some(v) => fill(&mut payload, *slot, v, r)?,
                None => {
                    self.skipped += 1;
                    return Ok(());
                }
            }
        }
        for (slot, v) in &b.constants {
            fill(&mut payload, *slot, v, r)?;
        }
        if let Some(Derive::AdmissionRate { submitted, accepted }) = &b.derive {
            let (Some(s), Some(a)) = (cell(r, b.task, submitted)?, cell(r, b.task, accepted)?) else {
                self.skipped += 1;
                return Ok(());
            };
            let count = |v: &str| v.replace(',', "").parse::<u64>().map_err(|e| violation(r, e));
            let stats = TrackStats::new(payload.track.clone().unwrap_or_default(), Some(count(s)?), Some(count(a)?))
                .map_err(|e| violation(r, e))?;
            match admission_rate(&stats) {
                Some(rate) => payload.amount = Some(rate),
                None => {
                    self.skipped += 1;
                    return Ok(());
                }
            }
        }
        if b.field == Field::Doi {
            if let Some(doi) = payload.text.take() {
                payload.text = Some(doi.trim_start_matches("https://doi.org/").to_uppercase());
            }
        }

        let mut field = b.field;
        let two_new = !subject.is_resolved() && payload.item.as_ref().is_some_and(|i| !i.is_resolved() && *i != subject);
        if two_new {
            let Some(fb) = &b.fallback else {
                return Err(violation(r, "statement would link two new entities"));
            };
            let Some(text) = cell(r, b.task, &fb.text_column)? else {
                self.skipped += 1;
                return Ok(());
            };
            field = fb.field;
            payload.item = None;
            payload.text = Some(text.to_string());
        }

        let st = build_statement(&subject, field, &payload, self.vocab, &r.source_url).map_err(|e| violation(r, e))?;
        self.note_intro(schema, b, r, &subject)?;
        if let Some(item) = st.value().as_item() {
            let item = item.clone();
            self.note_intro(schema, b, r, &item)?;
        }
        self.statements.push(st);
        Ok(())
    }
}

fn render_statement(st: &Statement, intros: &BTreeMap<EntityRef, Intro>) -> Result<String, CompileError> {
    let bad = |e: &EntityRef| {
        CompileError::ConstraintViolation(format!(
            "{e} is not a resolved item (statement {} on {})",
            st.property(),
            st.subject()
        ))
    };
    let subject = match st.subject() {
        EntityRef::Resolved(q) => q.to_string(),
        e if intros.contains_key(e) => "LAST".to_string(),
        e => return Err(bad(e)),
    };
    let mut parts = vec![subject, st.property().to_string()];
    let push_value = |v: &Value, parts: &mut Vec<String>, allow_last: bool| -> Result<(), CompileError> {
        if let Some(e @ EntityRef::Placeholder(_)) = v.as_item() {
            if !(allow_last && intros.contains_key(e)) {
                return Err(bad(e));
            }
        }
        if let Value::Quantity(q) = v {
            if let Some(u @ EntityRef::Placeholder(_)) = q.unit() {
                return Err(bad(u));
            }
        }
        parts.push(render_value(v));
        Ok(())
    };
    push_value(st.value(), &mut parts, true)?;
    for (p, v) in st.qualifiers() {
        parts.push(p.to_string());
        push_value(v, &mut parts, false)?;
    }
    for (p, v) in st.references() {
        parts.push(format!("S{}", p.number()));
        push_value(v, &mut parts, false)?;
    }
    Ok(parts.join("|"))
}

type SortKey = (u64, u64, String, String);

fn sort_key(st: &Statement, line: &str) -> SortKey {
    (
        st.subject().qid().map_or(0, |q| q.number()),
        st.property().number(),
        render_value(st.value()),
        line.to_string(),
    )
}

/// Compiles exportable records into a batch.
///
/// Rejected records are ignored; any record still pending review is an
/// error. Output depends only on the set of records, not their order.
pub fn compile(
    records: &[ExtractionRecord],
    schemas: &[MappingSchema],
    vocab: &MappingVocabulary,
) -> Result<QsBatch, CompileError> {
    for s in schemas {
        s.check(vocab)?;
    }
    let mut recs: Vec<&ExtractionRecord> =
        records.iter().filter(|r| r.review_state != ReviewState::Rejected).collect();
    if let Some(r) = recs.iter().find(|r| !r.review_state.is_exportable()) {
        return Err(unresolved(r, format!("review state is {}", r.review_state.as_str())));
    }
    recs.sort_by(|a, b| a.id.cmp(&b.id));
    recs.dedup_by(|a, b| a.id == b.id);

    let mut ctx = Ctx { vocab, records: &recs, statements: Vec::new(), intros: BTreeMap::new(), skipped: 0 };
    for schema in schemas {
        for b in &schema.column_bindings {
            for r in recs.iter().filter(|r| r.task == b.task) {
                ctx.bind(schema, b, r)?;
            }
        }
    }

    let Ctx { statements, intros, skipped, .. } = ctx;
    let mut stats = BatchStats { skipped, ..BatchStats::default() };
    let mut top: BTreeSet<(SortKey, String)> = BTreeSet::new();
    let mut own: BTreeMap<&EntityRef, BTreeSet<(SortKey, String)>> = BTreeMap::new();
    let mut inbound: BTreeMap<&EntityRef, BTreeSet<(SortKey, String)>> = BTreeMap::new();
    for st in &statements {
        let line = render_statement(st, &intros)?;
        let entry = (sort_key(st, &line), line);
        if !st.subject().is_resolved() {
            own.entry(st.subject()).or_default().insert(entry);
        } else if let Some(e @ EntityRef::Placeholder(_)) = st.value().as_item() {
            inbound.entry(e).or_default().insert(entry);
        } else {
            top.insert(entry);
        }
    }

    let mut lines: Vec<String> = top.into_iter().map(|(_, l)| l).collect();
    let reference = vocab
        .property(crate::model::PropertyKey::ReferenceUrl)
        .ok_or_else(|| CompileError::ConstraintViolation("reference_url property is unbound".into()))?;
    let instance_of = vocab.property(crate::model::PropertyKey::InstanceOf);
    for (entity, intro) in &intros {
        let used = own.contains_key(entity) || inbound.contains_key(entity);
        if !used {
            continue;
        }
        if intro.labels.is_empty() {
            return Err(CompileError::ConstraintViolation(format!("new entity {entity} has no label")));
        }
        stats.creates += 1;
        lines.push("CREATE".to_string());
        for (lang, text) in &intro.labels {
            lines.push(format!("LAST|L{lang}|{}", quote(text)));
        }
        if let (Some(class), Some(p31)) = (&intro.class, instance_of) {
            let class = class.qid().ok_or_else(|| {
                CompileError::ConstraintViolation(format!("class {class} of {entity} is not a resolved item"))
            })?;
            let source = intro.source.as_ref().map(|u| quote(u.as_str())).unwrap_or_default();
            let line = format!("LAST|{p31}|{class}|S{}|{source}", reference.number());
            let dup = own.get(entity).is_some_and(|s| s.iter().any(|(_, l)| *l == line));
            if !dup {
                lines.push(line);
            }
        }
        for set in [own.get(entity), inbound.get(entity)].into_iter().flatten() {
            lines.extend(set.iter().map(|(_, l)| l.clone()));
        }
    }

    for line in &lines {
        let fields = super::grammar::tokenize(line).map_err(|e| CompileError::ConstraintViolation(e.to_string()))?;
        if fields.len() >= 3 && !fields[1].starts_with('L') {
            stats.statements += 1;
            for key in fields[3..].iter().step_by(2) {
                if key.starts_with('S') {
                    stats.references += 1;
                } else {
                    stats.qualifiers += 1;
                }
            }
        }
    }
    Ok(QsBatch { lines, stats })
}
