use std::path::{Component, PathBuf};
use std::time::Duration;

use url::Url;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FetchError {
    #[error("{url}: {message}")]
    Transport { url: String, message: String },
    #[error("network access is disabled")]
    Offline,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchResponse {
    pub status: u16,
    pub content_type: String,
    pub body: String,
}

impl FetchResponse {
    pub fn ok(&self) -> bool {
        (200..300).contains(&self.status)
    }

    pub fn is_html(&self) -> bool {
        self.content_type.contains("html")
    }
}

pub trait Fetcher: Sync {
    fn fetch(&self, url: &Url) -> Result<FetchResponse, FetchError>;
}

pub struct HttpFetcher {
    client: reqwest::blocking::Client,
}

impl HttpFetcher {
    pub fn new(timeout: Duration) -> Result<Self, FetchError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("confmeta/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| FetchError::Transport { url: String::new(), message: e.to_string() })?;
        Ok(HttpFetcher { client })
    }
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, url: &Url) -> Result<FetchResponse, FetchError> {
        let err = |e: reqwest::Error| FetchError::Transport { url: url.to_string(), message: e.to_string() };
        let resp = self.client.get(url.clone()).send().map_err(err)?;
        let status = resp.status().as_u16();
        let content_type = resp
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .unwrap_or("")
            .to_string();
        let body = resp.text().map_err(err)?;
        Ok(FetchResponse { status, content_type, body })
    }
}

/// Serves a directory as if it were the site: the URL path maps to a file
/// under `root`, and a path ending in `/` maps to its `index.html`.
pub struct OfflineFetcher {
    root: PathBuf,
}

impl OfflineFetcher {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        OfflineFetcher { root: root.into() }
    }

    fn path_for(&self, url: &Url) -> Option<PathBuf> {
        let mut path = self.root.clone();
        let rel = PathBuf::from(url.path().trim_start_matches('/'));
        for c in rel.components() {
            match c {
                Component::Normal(part) => path.push(part),
                _ => return None,
            }
        }
        if url.path().ends_with('/') || path.is_dir() {
            path.push("index.html");
        }
        Some(path)
    }
}

fn content_type_for(path: &std::path::Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("html" | "htm") => "text/html",
        Some("xml") => "application/xml",
        Some("txt") => "text/plain",
        Some("json") => "application/json",
        _ => "application/octet-stream",
    }
}

impl Fetcher for OfflineFetcher {
    fn fetch(&self, url: &Url) -> Result<FetchResponse, FetchError> {
        let not_found = FetchResponse { status: 404, content_type: "text/plain".into(), body: String::new() };
        let Some(path) = self.path_for(url) else { return Ok(not_found) };
        match std::fs::read(&path) {
            Ok(bytes) => Ok(FetchResponse {
                status: 200,
                content_type: content_type_for(&path).into(),
                body: String::from_utf8_lossy(&bytes).into_owned(),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(not_found),
            Err(e) => Err(FetchError::Transport { url: url.to_string(), message: e.to_string() }),
        }
    }
}

/// Refuses every request; used when the pipeline runs offline.
pub struct DenyFetcher;

impl Fetcher for DenyFetcher {
    fn fetch(&self, _url: &Url) -> Result<FetchResponse, FetchError> {
        Err(FetchError::Offline)
    }
}
