//! Job stages: harvest → extract → reconcile → review → compile → done.
//!
//! Each stage reads what it needs from the store, runs without holding the
//! store lock, then commits its results and the advanced job in one log
//! append. A failed stage records the error and leaves the job where it was.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use chrono::{DateTime, Utc};
use sha2::{Digest, Sha256};
use url::Url;

use crate::config::{Config, ConferenceConfig};
use crate::curation::{decide, DecisionError, DecisionRequest};
use crate::extract::{self, HttpProvider, MockProvider, Provider, SourceChunk};
use crate::frontmatter::{read_source, FrontMatterDoc, PdftotextAdapter};
use crate::model::{LabelSet, MappingVocabulary};
use crate::qs::{compile, validate_batch, BatchStats, MappingSchema};
use crate::reconcile::{reconcile_batch, BatchOutcome, EntityIndex};
use crate::records::{ExtractionRecord, ReviewState, SourceKind, Task};
use crate::sparql::{self, Endpoint, HttpEndpoint, RecordingEndpoint, ReplayEndpoint, Templates};
use crate::store::{AuditEntry, EventInfo, Job, Mutation, Stage, StoredBatch, Store, StoreError};
use crate::web::{self, DenyFetcher, Fetcher, HttpFetcher, OfflineFetcher, PageRecord};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("job {job} is at stage {expected}, cannot run {requested}")]
    StageOrderViolation { job: String, expected: Stage, requested: Stage },
    #[error("{remaining} records need review")]
    ReviewPending { remaining: usize },
    #[error("unknown job {0}")]
    UnknownJob(String),
    #[error("unknown conference {0}")]
    UnknownConference(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{stage} failed: {message}")]
    Stage { stage: Stage, message: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
}

type Counters = BTreeMap<String, u64>;

fn stage_err(stage: Stage) -> impl Fn(String) -> PipelineError {
    move |message| PipelineError::Stage { stage, message }
}

pub struct Pipeline {
    pub config: Config,
    vocab: MappingVocabulary,
    schemas: Vec<MappingSchema>,
    index: EntityIndex,
    templates: Templates,
}

#[derive(Debug, Default)]
pub struct SparqlHarvest {
    pub records: Vec<ExtractionRecord>,
    pub subevents: Vec<sparql::SubEvent>,
    pub counters: BTreeMap<String, u64>,
}

struct StageOutput {
    mutations: Vec<Mutation>,
    counters: Counters,
}

fn lock(store: &Mutex<Store>) -> std::sync::MutexGuard<'_, Store> {
    store.lock().unwrap_or_else(|p| p.into_inner())
}

impl Pipeline {
    pub fn new(config: Config) -> Result<Self, PipelineError> {
        let cfg = |e: String| PipelineError::Config(e);
        let vocab = match &config.vocabulary {
            Some(p) => MappingVocabulary::load(p).map_err(|e| cfg(format!("{}: {e}", p.display())))?,
            None => MappingVocabulary::builtin(),
        };
        let mut schemas = Vec::new();
        for p in &config.schemas {
            let mut s = MappingSchema::load(p).map_err(|e| cfg(e.to_string()))?;
            for c in &config.conferences {
                if let Some(q) = &c.qid {
                    s.subjects.entry(c.key.clone()).or_insert_with(|| q.clone());
                }
            }
            s.check(&vocab).map_err(|e| cfg(format!("{}: {e}", p.display())))?;
            schemas.push(s);
        }
        let index = match &config.entity_index {
            Some(p) => EntityIndex::load(p).map_err(|e| cfg(format!("{}: {e}", p.display())))?,
            None => EntityIndex::default(),
        };
        let templates = match &config.sparql.templates_dir {
            Some(d) => Templates::with_overrides(d).map_err(|e| cfg(format!("{}: {e}", d.display())))?,
            None => Templates::default(),
        };
        Ok(Pipeline { config, vocab, schemas, index, templates })
    }

    pub fn vocabulary(&self) -> &MappingVocabulary {
        &self.vocab
    }

    pub fn schemas(&self) -> &[MappingSchema] {
        &self.schemas
    }

    fn conference(&self, key: &str) -> Result<&ConferenceConfig, PipelineError> {
        self.config.conference(key).ok_or_else(|| PipelineError::UnknownConference(key.to_string()))
    }

    pub fn artifacts_dir(&self, job_id: &str) -> PathBuf {
        self.config.store_dir.join("artifacts").join(job_id)
    }

    /// Registers a job for a configured conference, starting at harvest.
    pub fn create_job(&self, store: &Mutex<Store>, conference_key: &str, now: DateTime<Utc>) -> Result<Job, PipelineError> {
        let conf = self.conference(conference_key)?;
        let mut st = lock(store);
        let id = format!("job-{:04}", st.state().jobs.len() + 1);
        let job = Job {
            id,
            stage: Stage::Harvest,
            conference_key: conference_key.to_string(),
            created_at: now,
            counters: BTreeMap::new(),
            error: None,
        };
        let event = EventInfo {
            key: conf.key.clone(),
            series: conf.series(),
            label: conf.label.clone(),
            year: conf.year().expect("validated config"),
            participants: conf.participants,
        };
        st.commit(vec![Mutation::PutEvent { event }, Mutation::PutJob { job: job.clone() }])?;
        Ok(job)
    }

    /// The latest job of a conference, if any.
    pub fn job_for(&self, store: &Mutex<Store>, conference_key: &str) -> Option<Job> {
        lock(store).state().jobs.values().filter(|j| j.conference_key == conference_key).max_by(|a, b| a.id.cmp(&b.id)).cloned()
    }

    /// Runs `stage` of `job_id`, which must be the job's next stage.
    pub fn run_stage(&self, store: &Mutex<Store>, job_id: &str, stage: Stage, now: DateTime<Utc>) -> Result<Job, PipelineError> {
        let job = lock(store).state().jobs.get(job_id).cloned().ok_or_else(|| PipelineError::UnknownJob(job_id.into()))?;
        if job.stage != stage || stage == Stage::Done {
            return Err(PipelineError::StageOrderViolation { job: job.id, expected: job.stage, requested: stage });
        }
        let result = match stage {
            Stage::Harvest => self.harvest(store, &job, now),
            Stage::Extract => self.extract(store, &job),
            Stage::Reconcile => self.reconcile(store, &job, now),
            Stage::Review => self.review(store, &job),
            Stage::Compile => self.compile(store, &job, now),
            Stage::Done => unreachable!(),
        };
        let mut st = lock(store);
        // Re-read: decisions may have landed while the stage ran.
        let mut current = st.state().jobs.get(job_id).cloned().unwrap_or(job);
        match result {
            Ok(StageOutput { mut mutations, counters }) => {
                current.stage = stage.next();
                current.error = None;
                current.counters.insert(stage, counters);
                mutations.push(Mutation::PutJob { job: current.clone() });
                st.commit(mutations)?;
                log::info!("{job_id}: {stage} done");
                Ok(current)
            }
            Err(e) => {
                current.error = Some(e.to_string());
                st.put_job(current)?;
                Err(e)
            }
        }
    }

    /// Runs stages until the job is done or reaches `until`.
    pub fn run_until(&self, store: &Mutex<Store>, job_id: &str, until: Stage, now: DateTime<Utc>) -> Result<Job, PipelineError> {
        loop {
            let job = lock(store).state().jobs.get(job_id).cloned().ok_or_else(|| PipelineError::UnknownJob(job_id.into()))?;
            if job.stage >= until || job.stage == Stage::Done {
                return Ok(job);
            }
            self.run_stage(store, job_id, job.stage, now)?;
        }
    }

    fn offline_guard(&self, what: &str) -> Result<(), String> {
        if self.config.offline {
            Err(format!("offline mode: no fixture configured for {what}"))
        } else {
            Ok(())
        }
    }

    fn fetcher(&self, conf: &ConferenceConfig) -> Result<Box<dyn Fetcher>, String> {
        if let Some(root) = &conf.offline_root {
            return Ok(Box::new(OfflineFetcher::new(root)));
        }
        if self.config.offline {
            return Ok(Box::new(DenyFetcher));
        }
        Ok(Box::new(HttpFetcher::new(Duration::from_secs(30)).map_err(|e| e.to_string())?))
    }

    fn endpoint(&self) -> Result<Box<dyn Endpoint>, String> {
        let s = &self.config.sparql;
        if let Some(dir) = &s.replay_dir {
            return Ok(Box::new(ReplayEndpoint::new(dir)));
        }
        self.offline_guard("SPARQL")?;
        let url = s.endpoint.clone().ok_or("no SPARQL endpoint configured")?;
        let http = HttpEndpoint::new(url, Duration::from_secs(s.timeout_secs), s.max_retries).map_err(|e| e.to_string())?;
        Ok(match &s.record_dir {
            Some(dir) => Box::new(RecordingEndpoint::new(http, dir)),
            None => Box::new(http),
        })
    }

    fn provider(&self) -> Result<Box<dyn Provider>, String> {
        let l = &self.config.llm;
        if let Some(dir) = &l.mock_dir {
            return Ok(Box::new(MockProvider::new(dir).with_model(l.mock_model.clone())));
        }
        self.offline_guard("the LLM")?;
        let cfg = l.http.clone().ok_or("no LLM provider configured")?;
        Ok(Box::new(HttpProvider::new(cfg).map_err(|e| e.to_string())?))
    }

    /// Crawls the conference website (fixture tree when one is configured).
    pub fn crawl_site(&self, conf: &ConferenceConfig) -> Result<Option<web::CrawlResult>, String> {
        let Some(seed) = &conf.website else { return Ok(None) };
        let fetcher = self.fetcher(conf)?;
        let result = web::crawl(seed, &self.config.crawl, fetcher.as_ref()).map_err(|e| e.to_string())?;
        Ok(Some(result))
    }

    /// Plain text of the conference's proceedings front matter.
    pub fn frontmatter_text(&self, conf: &ConferenceConfig) -> Result<Option<String>, String> {
        let Some(path) = &conf.frontmatter else { return Ok(None) };
        read_source(path, Some(&PdftotextAdapter::default())).map(Some).map_err(|e| e.to_string())
    }

    pub fn frontmatter_chunks(&self, conf: &ConferenceConfig, text: &str, task: Task) -> Result<Vec<SourceChunk>, String> {
        let url = conf
            .frontmatter_url
            .clone()
            .or_else(|| conf.website.clone())
            .ok_or_else(|| format!("{}: frontmatter_url is required", conf.key))?;
        Ok(FrontMatterDoc::ingest(&conf.key, url, text.to_string(), self.config.budget_words).source_chunks(task))
    }

    /// Papers, authorship signatures and sub-events from the endpoint.
    pub fn harvest_sparql(&self, conf: &ConferenceConfig) -> Result<SparqlHarvest, String> {
        let mut out = SparqlHarvest::default();
        if conf.proceedings_iri.is_none() && conf.conference_iri.is_none() {
            return Ok(out);
        }
        let endpoint = self.endpoint()?;
        let e = |e: sparql::SparqlError| e.to_string();
        if let Some(iri) = &conf.proceedings_iri {
            let fallback = Url::parse(iri).map_err(|e| format!("proceedings iri: {e}"))?;
            let papers = sparql::papers_of_proceedings(endpoint.as_ref(), &self.templates, iri).map_err(e)?;
            let authors = sparql::authors_of_proceedings(endpoint.as_ref(), &self.templates, iri).map_err(e)?;
            out.counters.insert("papers".into(), papers.items.len() as u64);
            out.counters.insert("signatures".into(), authors.items.len() as u64);
            out.counters.insert("flagged_papers".into(), authors.flagged.len() as u64);
            out.counters.insert("sparql_warnings".into(), (papers.warnings.len() + authors.warnings.len()) as u64);
            out.records.extend(sparql::paper_records(&conf.key, &fallback, &papers.items));
            let mut sigs = sparql::authorship_records(&conf.key, &fallback, &authors.items);
            for r in &mut sigs {
                if authors.flagged.iter().any(|p| r.cell("paper_iri") == Some(p.as_str())) {
                    r.review_state = ReviewState::NeedsReview;
                }
            }
            out.records.extend(sigs);
        }
        if let Some(iri) = &conf.conference_iri {
            let subs = sparql::subevents_of_conference(endpoint.as_ref(), &self.templates, iri).map_err(e)?;
            out.counters.insert("subevents".into(), subs.items.len() as u64);
            out.counters.insert("subevents_skipped".into(), subs.warnings.len() as u64);
            out.subevents = subs.items;
        }
        Ok(out)
    }

    /// Runs one extraction task over `chunks` with the configured provider.
    pub fn extract_chunks(&self, task: Task, chunks: &[SourceChunk]) -> Result<extract::ExtractOutcome, String> {
        let provider = self.provider()?;
        extract::extract(task, chunks, provider.as_ref(), self.config.llm.concurrency).map_err(|e| e.to_string())
    }

    /// Entity reconciliation plus the vocabulary check. Returns the
    /// decisions and how many records the vocabulary check sent to review.
    pub fn reconcile_records(
        &self,
        records: &mut [ExtractionRecord],
        now: DateTime<Utc>,
    ) -> Result<(BatchOutcome, u64), String> {
        let outcome = reconcile_batch(records, &self.index, self.config.thresholds, now).map_err(|e| e.to_string())?;
        let mut vocab_review = 0;
        for r in records.iter_mut().filter(|r| !r.review_state.is_final()) {
            let unknown = self.unknown_labels(r);
            if !unknown.is_empty() && r.review_state != ReviewState::NeedsReview {
                log::info!("{}: unknown vocabulary labels {}", r.id, unknown.join(", "));
                r.review_state = ReviewState::NeedsReview;
                r.version += 1;
                vocab_review += 1;
            }
        }
        Ok((outcome, vocab_review))
    }

    /// Compiles records into validated batch text.
    pub fn compile_records(&self, records: &[ExtractionRecord]) -> Result<(String, BatchStats), String> {
        let batch = compile(records, &self.schemas, &self.vocab).map_err(|e| e.to_string())?;
        let text = batch.to_text();
        let report = validate_batch(&text, &self.vocab);
        if let Some(v) = report.violations.first() {
            return Err(format!("batch line {}: {} ({} violations)", v.line, v.message, report.violations.len()));
        }
        Ok((text, batch.stats))
    }

    fn harvest(&self, store: &Mutex<Store>, job: &Job, _now: DateTime<Utc>) -> Result<StageOutput, PipelineError> {
        let err = stage_err(Stage::Harvest);
        let conf = self.conference(&job.conference_key)?;
        let dir = self.artifacts_dir(&job.id);
        std::fs::create_dir_all(&dir).map_err(|e| err(e.to_string()))?;
        let mut counters = Counters::new();

        if let Some(result) = self.crawl_site(conf).map_err(&err)? {
            let mut buf = Vec::new();
            web::write_jsonl(&result.pages, &mut buf).map_err(|e| err(e.to_string()))?;
            write_atomic(&dir.join("pages.jsonl"), &buf).map_err(&err)?;
            counters.insert("pages".into(), result.pages.len() as u64);
            counters.insert("crawl_warnings".into(), result.warnings.len() as u64);
            for w in &result.warnings {
                log::warn!("{}: {w}", job.id);
            }
        }
        if let Some(text) = self.frontmatter_text(conf).map_err(&err)? {
            write_atomic(&dir.join("frontmatter.txt"), text.as_bytes()).map_err(&err)?;
            counters.insert("frontmatter_words".into(), text.split_whitespace().count() as u64);
        }
        let harvest = self.harvest_sparql(conf).map_err(&err)?;
        counters.extend(harvest.counters);
        if conf.conference_iri.is_some() {
            let json = serde_json::to_vec_pretty(&harvest.subevents).map_err(|e| err(e.to_string()))?;
            write_atomic(&dir.join("subevents.json"), &json).map_err(&err)?;
        }
        let st = lock(store);
        let mutations = harvest
            .records
            .into_iter()
            .filter(|r| !st.state().records.contains_key(&r.id))
            .map(|r| Mutation::PutRecord { record: Box::new(r) })
            .collect();
        Ok(StageOutput { mutations, counters })
    }

    fn chunks(&self, job: &Job, conf: &ConferenceConfig, task: Task) -> Result<Vec<SourceChunk>, String> {
        let dir = self.artifacts_dir(&job.id);
        let mut chunks = match conf.source_for(task) {
            SourceKind::Website => {
                let path = dir.join("pages.jsonl");
                if !path.exists() {
                    return Ok(vec![]);
                }
                let file = std::fs::File::open(&path).map_err(|e| e.to_string())?;
                let pages: Vec<PageRecord> = web::read_jsonl(std::io::BufReader::new(file)).map_err(|e| e.to_string())?;
                web::source_chunks(&conf.key, &pages, task)
            }
            SourceKind::FrontMatter => {
                let path = dir.join("frontmatter.txt");
                if !path.exists() {
                    return Ok(vec![]);
                }
                let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
                self.frontmatter_chunks(conf, &text, task)?
            }
            SourceKind::Sparql | SourceKind::Manual => vec![],
        };
        chunks.truncate(self.config.llm.max_chunks.max(1));
        Ok(chunks)
    }

    fn extract(&self, store: &Mutex<Store>, job: &Job) -> Result<StageOutput, PipelineError> {
        let err = stage_err(Stage::Extract);
        let conf = self.conference(&job.conference_key)?;
        let tasks = conf.tasks();
        let mut counters = Counters::new();
        let mut records = Vec::new();
        for task in tasks {
            let chunks = self.chunks(job, conf, task).map_err(&err)?;
            counters.insert(format!("chunks_{task}"), chunks.len() as u64);
            if chunks.is_empty() {
                continue;
            }
            let out = self.extract_chunks(task, &chunks).map_err(&err)?;
            for e in &out.errors {
                log::warn!("{}: {task} chunk {} from {}: {}", job.id, e.chunk_index, e.source_url, e.error);
            }
            *counters.entry("chunk_errors".into()).or_default() += out.errors.len() as u64;
            counters.insert(format!("records_{task}"), out.records.len() as u64);
            records.extend(out.records);
        }
        let st = lock(store);
        let mut mutations = Vec::new();
        for r in records {
            if r.review_state == ReviewState::NeedsReview {
                *counters.entry("ungrounded".into()).or_default() += 1;
            }
            // Keep whatever curators already did to a record seen before.
            if !st.state().records.contains_key(&r.id) {
                mutations.push(Mutation::PutRecord { record: Box::new(r) });
            }
        }
        Ok(StageOutput { mutations, counters })
    }

    /// Label cells that must name a vocabulary item.
    fn unknown_labels(&self, r: &ExtractionRecord) -> Vec<String> {
        let sets: &[(&str, LabelSet)] = match r.task {
            Task::Counts => &[("track", LabelSet::Track)],
            Task::Roles => &[("role", LabelSet::Role)],
            Task::PcMembers => &[("track", LabelSet::Track), ("role", LabelSet::Role)],
            Task::Deadlines => &[("kind", LabelSet::Deadline)],
            Task::Sponsors => &[("level", LabelSet::SponsorLevel)],
            Task::Awards => &[("award", LabelSet::Award)],
            Task::Papers | Task::Authorships => &[],
        };
        sets.iter()
            .filter_map(|(col, set)| {
                let v = r.cell(col)?;
                self.vocab.lookup(*set, v).is_none().then(|| format!("{col}={v:?}"))
            })
            .collect()
    }

    fn reconcile(&self, store: &Mutex<Store>, job: &Job, now: DateTime<Utc>) -> Result<StageOutput, PipelineError> {
        let err = stage_err(Stage::Reconcile);
        let before: Vec<ExtractionRecord> = lock(store).state().records_of(&job.conference_key).cloned().collect();
        let mut records = before.clone();
        let (outcome, vocab_review) = self.reconcile_records(&mut records, now).map_err(&err)?;
        let mut counters = Counters::new();
        for d in &outcome.decisions {
            *counters.entry(format!("{:?}", d.outcome).to_lowercase()).or_default() += 1;
        }
        counters.insert("review_entity".into(), outcome.review.len() as u64);
        counters.insert("review_vocabulary".into(), vocab_review);

        let mut mutations = Vec::new();
        for (old, new) in before.iter().zip(&records) {
            if old != new {
                mutations.push(Mutation::PutRecord { record: Box::new(new.clone()) });
            }
        }
        for d in outcome.decisions {
            let r = records.iter().find(|r| r.id == d.record_id).expect("decision for a batch record");
            let from = before.iter().find(|b| b.id == d.record_id).map_or(r.review_state, |b| b.review_state);
            mutations.push(Mutation::Audit {
                entry: Box::new(AuditEntry {
                    record_id: d.record_id.clone(),
                    action: format!("{:?}", d.outcome).to_lowercase(),
                    actor: d.decided_by.clone(),
                    at: d.decided_at,
                    from_state: from,
                    to_state: r.review_state,
                    version: r.version,
                    decision: Some(d),
                }),
            });
        }
        Ok(StageOutput { mutations, counters })
    }

    fn review(&self, store: &Mutex<Store>, job: &Job) -> Result<StageOutput, PipelineError> {
        let st = lock(store);
        let remaining = st.state().pending_review(&job.conference_key);
        if remaining > 0 {
            return Err(PipelineError::ReviewPending { remaining });
        }
        let mut counters = Counters::new();
        for r in st.state().records_of(&job.conference_key) {
            *counters.entry(r.review_state.as_str().to_string()).or_default() += 1;
        }
        Ok(StageOutput { mutations: vec![], counters })
    }

    /// Compiles and validates the conference's exportable records.
    pub fn build_batch(&self, store: &Mutex<Store>, job: &Job, now: DateTime<Utc>) -> Result<StoredBatch, PipelineError> {
        let err = stage_err(Stage::Compile);
        let records: Vec<ExtractionRecord> = {
            let st = lock(store);
            let remaining = st.state().pending_review(&job.conference_key);
            if remaining > 0 {
                return Err(PipelineError::ReviewPending { remaining });
            }
            st.state().records_of(&job.conference_key).cloned().collect()
        };
        let (text, stats) = self.compile_records(&records).map_err(&err)?;
        let id = format!("b{}", &hex::encode(Sha256::digest(text.as_bytes()))[..16]);
        Ok(StoredBatch { id, job_id: job.id.clone(), created_at: now, text, stats })
    }

    fn compile(&self, store: &Mutex<Store>, job: &Job, now: DateTime<Utc>) -> Result<StageOutput, PipelineError> {
        let batch = self.build_batch(store, job, now)?;
        let s = &batch.stats;
        let counters = [
            ("creates", s.creates),
            ("statements", s.statements),
            ("qualifiers", s.qualifiers),
            ("references", s.references),
            ("skipped", s.skipped),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v as u64))
        .collect();
        let existing = lock(store).state().batches.get(&batch.id).map(|b| b.text == batch.text).unwrap_or(false);
        let mutations = if existing { vec![] } else { vec![Mutation::PutBatch { batch }] };
        Ok(StageOutput { mutations, counters })
    }

    /// Exports a batch for `job_id`: passes the review gate and compiles as
    /// needed. Gated jobs fail with `ReviewPending`.
    pub fn export(&self, store: &Mutex<Store>, job_id: &str, now: DateTime<Utc>) -> Result<StoredBatch, PipelineError> {
        let job = lock(store).state().jobs.get(job_id).cloned().ok_or_else(|| PipelineError::UnknownJob(job_id.into()))?;
        if job.stage < Stage::Review {
            return Err(PipelineError::StageOrderViolation { job: job.id, expected: job.stage, requested: Stage::Compile });
        }
        let job = self.run_until(store, job_id, Stage::Done, now)?;
        let batch = self.build_batch(store, &job, now)?;
        let mut st = lock(store);
        if !st.state().batches.contains_key(&batch.id) {
            st.commit(vec![Mutation::PutBatch { batch: batch.clone() }])?;
            return Ok(batch);
        }
        Ok(st.state().batches[&batch.id].clone())
    }

    /// Applies a curator decision and logs it.
    pub fn decide(
        &self,
        store: &Mutex<Store>,
        record_id: &str,
        req: &DecisionRequest,
        actor: &str,
        now: DateTime<Utc>,
    ) -> Result<ExtractionRecord, PipelineError> {
        let mut st = lock(store);
        let record = st.state().records.get(record_id).ok_or_else(|| DecisionError::NotFound(record_id.into()))?;
        let (next, audit) = decide(record, req, actor, now)?;
        st.commit(vec![Mutation::PutRecord { record: Box::new(next.clone()) }, Mutation::Audit { entry: Box::new(audit) }])?;
        Ok(next)
    }
}

fn write_atomic(path: &std::path::Path, bytes: &[u8]) -> Result<(), String> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| format!("{}: {e}", tmp.display()))?;
    std::fs::rename(&tmp, path).map_err(|e| format!("{}: {e}", path.display()))
}
