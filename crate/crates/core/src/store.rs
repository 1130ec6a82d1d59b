//! Append-only JSON-Lines write-ahead log plus snapshot.
//!
//! Every mutation is written and synced before it is applied in memory, so
//! reopening a store after a crash replays to the same state. One process
//! at a time holds the store through an OS file lock.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::qs::BatchStats;
use crate::reconcile::ReconciliationDecision;
use crate::records::{ExtractionRecord, ReviewState};

const WAL: &str = "wal.jsonl";
const SNAPSHOT: &str = "snapshot.json";
const LOCK: &str = "store.lock";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store {0} is locked by another process")]
    StoreLocked(PathBuf),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt store: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Harvest,
    Extract,
    Reconcile,
    Review,
    Compile,
    Done,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::Harvest, Stage::Extract, Stage::Reconcile, Stage::Review, Stage::Compile, Stage::Done];

    pub fn next(self) -> Stage {
        match self {
            Stage::Harvest => Stage::Extract,
            Stage::Extract => Stage::Reconcile,
            Stage::Reconcile => Stage::Review,
            Stage::Review => Stage::Compile,
            Stage::Compile | Stage::Done => Stage::Done,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Harvest => "harvest",
            Stage::Extract => "extract",
            Stage::Reconcile => "reconcile",
            Stage::Review => "review",
            Stage::Compile => "compile",
            Stage::Done => "done",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL.into_iter().find(|st| st.as_str() == s).ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    /// The next stage to run.
    pub stage: Stage,
    pub conference_key: String,
    pub created_at: DateTime<Utc>,
    /// Counters per completed stage.
    #[serde(default)]
    pub counters: BTreeMap<Stage, BTreeMap<String, u64>>,
    /// Last failure; the job stays at the stage that failed.
    #[serde(default)]
    pub error: Option<String>,
}

/// One curation or reconciliation action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub record_id: String,
    pub action: String,
    pub actor: String,
    pub at: DateTime<Utc>,
    pub from_state: ReviewState,
    pub to_state: ReviewState,
    pub version: u64,
    #[serde(default)]
    pub decision: Option<ReconciliationDecision>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredBatch {
    pub id: String,
    pub job_id: String,
    pub created_at: DateTime<Utc>,
    pub text: String,
    pub stats: BatchStats,
}

/// Conference event metadata used by reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventInfo {
    pub key: String,
    pub series: String,
    pub label: String,
    pub year: i32,
    #[serde(default)]
    pub participants: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StoreState {
    pub records: BTreeMap<String, ExtractionRecord>,
    pub audit: Vec<AuditEntry>,
    pub batches: BTreeMap<String, StoredBatch>,
    pub jobs: BTreeMap<String, Job>,
    pub events: BTreeMap<String, EventInfo>,
}

impl StoreState {
    pub fn records_of<'a>(&'a self, conference_key: &'a str) -> impl Iterator<Item = &'a ExtractionRecord> + 'a {
        self.records.values().filter(move |r| r.conference_key == conference_key)
    }

    pub fn pending_review(&self, conference_key: &str) -> usize {
        self.records_of(conference_key).filter(|r| r.review_state == ReviewState::NeedsReview).count()
    }

    fn apply(&mut self, m: Mutation) {
        match m {
            Mutation::PutRecord { record } => {
                self.records.insert(record.id.clone(), *record);
            }
            Mutation::Audit { entry } => self.audit.push(*entry),
            Mutation::PutBatch { batch } => {
                self.batches.insert(batch.id.clone(), batch);
            }
            Mutation::PutJob { job } => {
                self.jobs.insert(job.id.clone(), job);
            }
            Mutation::PutEvent { event } => {
                self.events.insert(event.key.clone(), event);
            }
        }
    }

    /// sha256 of the canonical JSON form; equal states hash equal.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("state serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Mutation {
    PutRecord { record: Box<ExtractionRecord> },
    Audit { entry: Box<AuditEntry> },
    PutBatch { batch: StoredBatch },
    PutJob { job: Job },
    PutEvent { event: EventInfo },
}

#[derive(Serialize, Deserialize)]
struct WalLine {
    seq: u64,
    #[serde(flatten)]
    mutation: Mutation,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    seq: u64,
    state: StoreState,
}

pub struct Store {
    dir: PathBuf,
    state: StoreState,
    seq: u64,
    wal: File,
    _lock: File,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("dir", &self.dir).field("seq", &self.seq).finish()
    }
}

impl Store {
    /// Opens (creating if needed) the store in `dir`, replaying its log.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        let lock = OpenOptions::new().create(true).truncate(false).write(true).open(dir.join(LOCK))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(std::fs::TryLockError::WouldBlock) => return Err(StoreError::StoreLocked(dir)),
            Err(std::fs::TryLockError::Error(e)) => return Err(e.into()),
        }

        let (mut seq, mut state) = match std::fs::read(dir.join(SNAPSHOT)) {
            Ok(bytes) => {
                let s: Snapshot =
                    serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt(format!("snapshot: {e}")))?;
                (s.seq, s.state)
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => (0, StoreState::default()),
            Err(e) => return Err(e.into()),
        };

        let wal_path = dir.join(WAL);
        let mut wal = OpenOptions::new().create(true).truncate(false).read(true).write(true).open(&wal_path)?;
        let mut good_len = 0u64;
        {
            let mut reader = BufReader::new(&wal);
            let mut line = String::new();
            loop {
                line.clear();
                let n = reader.read_line(&mut line)?;
                if n == 0 {
                    break;
                }
                let complete = line.ends_with('\n');
                match serde_json::from_str::<WalLine>(line.trim_end()) {
                    Ok(entry) if complete => {
                        good_len += n as u64;
                        if entry.seq > seq {
                            if entry.seq != seq + 1 {
                                return Err(StoreError::Corrupt(format!("log gap after seq {seq}")));
                            }
                            seq = entry.seq;
                            state.apply(entry.mutation);
                        }
                    }
                    // A torn final write from a crash: drop it.
                    _ if !complete => break,
                    Ok(_) => unreachable!(),
                    Err(e) => return Err(StoreError::Corrupt(format!("log line after seq {seq}: {e}"))),
                }
            }
        }
        if wal.metadata()?.len() != good_len {
            log::warn!("{}: discarding torn log tail", wal_path.display());
            wal.set_len(good_len)?;
        }
        wal.seek(SeekFrom::End(0))?;
        Ok(Store { dir, state, seq, wal, _lock: lock })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn state(&self) -> &StoreState {
        &self.state
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn state_hash(&self) -> String {
        self.state.hash()
    }

    /// Logs and applies mutations in order; they are durable on return.
    pub fn commit(&mut self, mutations: Vec<Mutation>) -> Result<(), StoreError> {
        if mutations.is_empty() {
            return Ok(());
        }
        let mut buf = Vec::new();
        let mut seq = self.seq;
        for m in &mutations {
            seq += 1;
            serde_json::to_writer(&mut buf, &WalLine { seq, mutation: m.clone() })
                .map_err(|e| StoreError::Corrupt(e.to_string()))?;
            buf.push(b'\n');
        }
        self.wal.write_all(&buf)?;
        self.wal.sync_data()?;
        for m in mutations {
            self.state.apply(m);
        }
        self.seq = seq;
        Ok(())
    }

    pub fn put_record(&mut self, record: ExtractionRecord) -> Result<(), StoreError> {
        self.commit(vec![Mutation::PutRecord { record: Box::new(record) }])
    }

    pub fn put_job(&mut self, job: Job) -> Result<(), StoreError> {
        self.commit(vec![Mutation::PutJob { job }])
    }

    /// Writes the full state and truncates the log.
    pub fn snapshot(&mut self) -> Result<(), StoreError> {
        let tmp = self.dir.join(format!("{SNAPSHOT}.tmp"));
        {
            let mut f = File::create(&tmp)?;
            serde_json::to_writer(&mut f, &Snapshot { seq: self.seq, state: self.state.clone() })
                .map_err(|e| StoreError::Corrupt(e.to_string()))?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, self.dir.join(SNAPSHOT))?;
        self.wal.set_len(0)?;
        self.wal.seek(SeekFrom::Start(0))?;
        self.wal.sync_all()?;
        Ok(())
    }
}
