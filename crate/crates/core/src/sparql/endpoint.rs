use std::path::{Path, PathBuf};
use std::time::Duration;

use sha2::{Digest, Sha256};

use super::SparqlError;

/// Anything that answers a SPARQL query with a raw results body.
pub trait Endpoint: Sync {
    fn name(&self) -> &str;
    fn query(&self, query: &str) -> Result<String, SparqlError>;
}

/// Replay file name of a query: sha256 of its exact text.
pub fn replay_key(query: &str) -> String {
    hex::encode(Sha256::digest(query.as_bytes()))
}

pub struct HttpEndpoint {
    url: String,
    client: reqwest::blocking::Client,
    max_retries: u32,
}

impl HttpEndpoint {
    pub fn new(url: impl Into<String>, timeout: Duration, max_retries: u32) -> Result<Self, SparqlError> {
        let url = url.into();
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("confmeta/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| SparqlError::EndpointUnreachable { endpoint: url.clone(), reason: e.to_string() })?;
        Ok(HttpEndpoint { url, client, max_retries })
    }

    fn attempt(&self, query: &str) -> Result<String, String> {
        let resp = self
            .client
            .post(&self.url)
            .header(reqwest::header::ACCEPT, "application/sparql-results+json")
            .header(reqwest::header::CONTENT_TYPE, "application/x-www-form-urlencoded")
            .body(url::form_urlencoded::Serializer::new(String::new()).append_pair("query", query).finish())
            .send()
            .map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("HTTP {}", status.as_u16()));
        }
        resp.text().map_err(|e| e.to_string())
    }
}

impl Endpoint for HttpEndpoint {
    fn name(&self) -> &str {
        &self.url
    }

    fn query(&self, query: &str) -> Result<String, SparqlError> {
        let mut last = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(500 << (attempt - 1)));
            }
            match self.attempt(query) {
                Ok(body) => return Ok(body),
                Err(e) => {
                    log::warn!("{}: attempt {} failed: {e}", self.url, attempt + 1);
                    last = e;
                }
            }
        }
        Err(SparqlError::EndpointUnreachable { endpoint: self.url.clone(), reason: last })
    }
}

/// Serves previously recorded bodies from `<dir>/<sha256(query)>.json`.
pub struct ReplayEndpoint {
    dir: PathBuf,
}

impl ReplayEndpoint {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReplayEndpoint { dir: dir.into() }
    }

    pub fn path_for(dir: &Path, query: &str) -> PathBuf {
        dir.join(format!("{}.json", replay_key(query)))
    }
}

impl Endpoint for ReplayEndpoint {
    fn name(&self) -> &str {
        self.dir.to_str().unwrap_or("replay")
    }

    fn query(&self, query: &str) -> Result<String, SparqlError> {
        let path = Self::path_for(&self.dir, query);
        std::fs::read_to_string(&path).map_err(|e| SparqlError::EndpointUnreachable {
            endpoint: self.name().to_string(),
            reason: format!("no recording {}: {e}", path.display()),
        })
    }
}

/// Passes queries through and stores each body byte-exactly for replay.
pub struct RecordingEndpoint<E> {
    inner: E,
    dir: PathBuf,
}

impl<E: Endpoint> RecordingEndpoint<E> {
    pub fn new(inner: E, dir: impl Into<PathBuf>) -> Self {
        RecordingEndpoint { inner, dir: dir.into() }
    }
}

impl<E: Endpoint> Endpoint for RecordingEndpoint<E> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn query(&self, query: &str) -> Result<String, SparqlError> {
        let body = self.inner.query(query)?;
        let io = |e: std::io::Error| SparqlError::EndpointUnreachable {
            endpoint: self.name().to_string(),
            reason: format!("recording failed: {e}"),
        };
        std::fs::create_dir_all(&self.dir).map_err(io)?;
        std::fs::write(ReplayEndpoint::path_for(&self.dir, query), &body).map_err(io)?;
        Ok(body)
    }
}
