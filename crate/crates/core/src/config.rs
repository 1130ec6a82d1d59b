//! Pipeline configuration file (TOML). Secrets never live here: the file
//! only names the environment variables that hold them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use url::Url;

use crate::extract::ProviderConfig;
use crate::model::EntityRef;
use crate::reconcile::Thresholds;
use crate::records::{SourceKind, Task};
use crate::web::CrawlLimits;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    /// Directory of canned responses, `<conference>/<task>.txt`.
    pub mock_dir: Option<PathBuf>,
    /// Model name recorded on records produced by the mock.
    pub mock_model: String,
    pub http: Option<ProviderConfig>,
    pub concurrency: usize,
    /// Best-scoring chunks sent per task and source.
    pub max_chunks: usize,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig { mock_dir: None, mock_model: "mock".into(), http: None, concurrency: 4, max_chunks: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SparqlConfig {
    pub endpoint: Option<String>,
    /// Recorded responses to serve instead of querying the endpoint.
    pub replay_dir: Option<PathBuf>,
    /// Where to record live responses.
    pub record_dir: Option<PathBuf>,
    /// Overrides for the built-in query templates.
    pub templates_dir: Option<PathBuf>,
    pub timeout_secs: u64,
    pub max_retries: u32,
}

impl Default for SparqlConfig {
    fn default() -> Self {
        SparqlConfig { endpoint: None, replay_dir: None, record_dir: None, templates_dir: None, timeout_secs: 60, max_retries: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApiConfig {
    pub bind: String,
    /// Environment variable holding the bearer token for mutations.
    pub token_env: String,
    /// Directory of static UI files served at `/`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ApiConfig {
    fn default() -> Self {
        ApiConfig { bind: "127.0.0.1:8080".into(), token_env: "CONFMETA_API_TOKEN".into(), static_dir: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConferenceConfig {
    pub key: String,
    pub label: String,
    #[serde(default)]
    pub series: Option<String>,
    #[serde(default)]
    pub year: Option<i32>,
    /// The event's Wikidata item.
    #[serde(default)]
    pub qid: Option<EntityRef>,
    #[serde(default)]
    pub participants: Option<u64>,
    #[serde(default)]
    pub website: Option<Url>,
    /// Directory served in place of the website.
    #[serde(default)]
    pub offline_root: Option<PathBuf>,
    /// Front-matter text or PDF.
    #[serde(default)]
    pub frontmatter: Option<PathBuf>,
    /// Citable URL of the front matter (the proceedings volume).
    #[serde(default)]
    pub frontmatter_url: Option<Url>,
    #[serde(default)]
    pub proceedings_iri: Option<String>,
    #[serde(default)]
    pub conference_iri: Option<String>,
    /// Text tasks to run; all by default.
    #[serde(default)]
    pub tasks: Option<Vec<Task>>,
    /// Source per task, overriding the defaults.
    #[serde(default)]
    pub task_sources: BTreeMap<Task, SourceKind>,
}

impl ConferenceConfig {
    pub fn series(&self) -> String {
        self.series.clone().unwrap_or_else(|| {
            self.key.chars().take_while(|c| c.is_ascii_alphabetic()).collect::<String>().to_lowercase()
        })
    }

    pub fn year(&self) -> Option<i32> {
        self.year.or_else(|| {
            let digits: String = self.key.chars().skip_while(|c| !c.is_ascii_digit()).take_while(char::is_ascii_digit).collect();
            digits.parse().ok()
        })
    }

    pub fn tasks(&self) -> Vec<Task> {
        self.tasks.clone().unwrap_or_else(|| Task::TEXT.to_vec())
    }

    /// Committee and count facts come from the proceedings, calendar and
    /// sponsorship facts from the website.
    pub fn source_for(&self, task: Task) -> SourceKind {
        self.task_sources.get(&task).copied().unwrap_or(match task {
            Task::Counts | Task::Roles | Task::PcMembers => SourceKind::FrontMatter,
            Task::Papers | Task::Authorships => SourceKind::Sparql,
            _ => SourceKind::Website,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub store_dir: PathBuf,
    #[serde(default)]
    pub offline: bool,
    /// Mapping vocabulary; the built-in one when absent.
    #[serde(default)]
    pub vocabulary: Option<PathBuf>,
    /// Mapping schemas compiled together.
    #[serde(default)]
    pub schemas: Vec<PathBuf>,
    /// Entity index snapshot (JSON Lines).
    #[serde(default)]
    pub entity_index: Option<PathBuf>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub crawl: CrawlLimits,
    #[serde(default)]
    pub llm: LlmConfig,
    #[serde(default)]
    pub sparql: SparqlConfig,
    #[serde(default)]
    pub api: ApiConfig,
    #[serde(default = "default_budget")]
    pub budget_words: usize,
    #[serde(default)]
    pub conferences: Vec<ConferenceConfig>,
}

fn default_budget() -> usize {
    crate::frontmatter::DEFAULT_BUDGET_WORDS
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn rebase_opt(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(p) = p {
        rebase(base, p);
    }
}

impl Config {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut c: Config = toml::from_str(text).map_err(|e| ConfigError::Invalid {
            path: base.display().to_string(),
            message: e.to_string(),
        })?;
        c.rebase(base);
        c.validate().map_err(|message| ConfigError::Invalid { path: base.display().to_string(), message })?;
        Ok(c)
    }

    /// Reads a config file; relative paths in it are relative to its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            ConfigError::Invalid { message, .. } => ConfigError::Invalid { path: path.display().to_string(), message },
            other => other,
        })
    }

    fn rebase(&mut self, base: &Path) {
        rebase(base, &mut self.store_dir);
        rebase_opt(base, &mut self.vocabulary);
        rebase_opt(base, &mut self.entity_index);
        for s in &mut self.schemas {
            rebase(base, s);
        }
        rebase_opt(base, &mut self.llm.mock_dir);
        rebase_opt(base, &mut self.sparql.replay_dir);
        rebase_opt(base, &mut self.sparql.record_dir);
        rebase_opt(base, &mut self.sparql.templates_dir);
        rebase_opt(base, &mut self.api.static_dir);
        for c in &mut self.conferences {
            rebase_opt(base, &mut c.offline_root);
            rebase_opt(base, &mut c.frontmatter);
        }
    }

    fn validate(&self) -> Result<(), String> {
        self.thresholds.validate()?;
        let mut keys = std::collections::BTreeSet::new();
        for c in &self.conferences {
            if !keys.insert(&c.key) {
                return Err(format!("conference {} listed twice", c.key));
            }
            if c.year().is_none() {
                return Err(format!("conference {}: no year and none in the key", c.key));
            }
            if let Some(t) = c.tasks.iter().flatten().find(|t| !t.is_text_task()) {
                return Err(format!("conference {}: {t} is not a text task", c.key));
            }
        }
        if self.budget_words == 0 {
            return Err("budget_words must be positive".into());
        }
        Ok(())
    }

    pub fn conference(&self, key: &str) -> Option<&ConferenceConfig> {
        self.conferences.iter().find(|c| c.key == key)
    }
}
