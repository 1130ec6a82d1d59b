//! Website crawler: polite breadth-first traversal of a conference site,
//! page text and embedded structured data, task chunk selection.

mod embedded;
mod fetch;
mod html;
mod robots;

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use url::Url;

pub use embedded::{extract_embedded, Embedded, StructuredItem, Syntax};
pub use fetch::{DenyFetcher, FetchError, FetchResponse, Fetcher, HttpFetcher, OfflineFetcher};
pub use html::{links, page_sections, visible_text, Section};
pub use robots::Robots;

use crate::extract::SourceChunk;
use crate::frontmatter::{self, Chunk, DEFAULT_BUDGET_WORDS};
use crate::keywords;
use crate::records::{ChunkSpan, SourceKind, Task};

pub const USER_AGENT: &str = "confmeta";

#[derive(Debug, thiserror::Error)]
pub enum CrawlError {
    #[error("seed {url} unreachable: {reason}")]
    SeedUnreachable { url: String, reason: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed page record: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrawlLimits {
    pub max_pages: usize,
    pub max_depth: usize,
    #[serde(with = "millis", rename = "per_host_delay_ms")]
    pub per_host_delay: Duration,
    pub concurrency: usize,
    pub respect_robots: bool,
}

impl Default for CrawlLimits {
    fn default() -> Self {
        CrawlLimits {
            max_pages: 200,
            max_depth: 3,
            per_host_delay: Duration::from_secs(1),
            concurrency: 4,
            respect_robots: true,
        }
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageRecord {
    pub url: Url,
    pub fetched_at: DateTime<Utc>,
    pub html: String,
    pub text: String,
    pub embedded: Vec<StructuredItem>,
    pub depth: usize,
}

#[derive(Debug, Clone, Default)]
pub struct CrawlResult {
    pub pages: Vec<PageRecord>,
    pub warnings: Vec<String>,
    /// Every URL requested, robots.txt and sitemap included.
    pub fetched: Vec<Url>,
}

/// Registrable domain (eTLD+1) of a URL, or the bare host where the public
/// suffix list has no answer (IP addresses, `localhost`).
pub fn registrable_domain(url: &Url) -> Option<String> {
    match url.host()? {
        url::Host::Domain(d) => {
            let host = d.to_ascii_lowercase();
            Some(psl::domain_str(&host).map(str::to_string).unwrap_or(host))
        }
        ip => Some(ip.to_string()),
    }
}

/// Serializes requests per host and spaces them by the configured delay.
struct HostGate {
    delay: Duration,
    hosts: Mutex<HashMap<String, Arc<Mutex<Option<Instant>>>>>,
}

impl HostGate {
    fn new(delay: Duration) -> Self {
        HostGate { delay, hosts: Mutex::new(HashMap::new()) }
    }

    fn fetch(&self, fetcher: &dyn Fetcher, url: &Url, log: &Mutex<Vec<Url>>) -> Result<FetchResponse, FetchError> {
        let host = url.host_str().unwrap_or("").to_string();
        let slot = self.hosts.lock().expect("gate poisoned").entry(host).or_default().clone();
        let mut last = slot.lock().expect("host slot poisoned");
        if let Some(prev) = *last {
            let since = prev.elapsed();
            if since < self.delay {
                std::thread::sleep(self.delay - since);
            }
        }
        log.lock().expect("log poisoned").push(url.clone());
        let result = fetcher.fetch(url);
        *last = Some(Instant::now());
        result
    }
}

fn sitemap_urls(xml: &str) -> Vec<String> {
    let re = Regex::new(r"(?s)<loc>\s*(.*?)\s*</loc>").expect("static regex");
    re.captures_iter(xml)
        .map(|c| c[1].replace("&amp;", "&"))
        .collect()
}

/// Breadth-first crawl from `seed` over links within its registrable
/// domain. URLs listed in `/sitemap.xml` are queued first at depth 1.
pub fn crawl(seed: &Url, limits: &CrawlLimits, fetcher: &dyn Fetcher) -> Result<CrawlResult, CrawlError> {
    let gate = HostGate::new(limits.per_host_delay);
    let log = Mutex::new(Vec::new());
    let mut result = CrawlResult::default();
    let domain = registrable_domain(seed);
    let in_scope = |u: &Url| matches!(u.scheme(), "http" | "https") && registrable_domain(u) == domain;

    let robots = if limits.respect_robots {
        let robots_url = seed.join("/robots.txt").expect("absolute path joins");
        match gate.fetch(fetcher, &robots_url, &log) {
            Ok(r) if r.ok() => Robots::parse(&r.body, USER_AGENT),
            _ => Robots::default(),
        }
    } else {
        Robots::default()
    };
    if !robots.allows(seed.path()) {
        let msg = format!("robots.txt disallows {seed}; nothing crawled");
        log::warn!("{msg}");
        result.warnings.push(msg);
        result.fetched = log.into_inner().expect("log poisoned");
        return Ok(result);
    }

    let mut seed = seed.clone();
    seed.set_fragment(None);
    let mut seen: HashSet<Url> = HashSet::from([seed.clone()]);
    let mut level: Vec<Url> = vec![seed.clone()];
    let mut sitemap_first: Vec<Url> = Vec::new();
    let sitemap_url = seed.join("/sitemap.xml").expect("absolute path joins");
    if let Ok(r) = gate.fetch(fetcher, &sitemap_url, &log) {
        if r.ok() {
            for raw in sitemap_urls(&r.body) {
                let Ok(mut u) = Url::parse(&raw) else { continue };
                u.set_fragment(None);
                if in_scope(&u) && robots.allows(u.path()) && seen.insert(u.clone()) {
                    sitemap_first.push(u);
                }
            }
        }
    }

    let mut depth = 0;
    while !level.is_empty() && depth <= limits.max_depth {
        let budget = limits.max_pages.saturating_sub(result.pages.len());
        if budget == 0 {
            break;
        }
        level.truncate(budget);
        let responses = fetch_level(&level, limits.concurrency, &gate, fetcher, &log);
        let mut next: Vec<Url> = if depth == 0 { std::mem::take(&mut sitemap_first) } else { Vec::new() };
        for (url, response) in level.iter().zip(responses) {
            let response = match response {
                Ok(r) if r.ok() => r,
                Ok(r) => {
                    if depth == 0 {
                        return Err(CrawlError::SeedUnreachable { url: url.to_string(), reason: format!("HTTP {}", r.status) });
                    }
                    result.warnings.push(format!("{url}: HTTP {}", r.status));
                    continue;
                }
                Err(e) => {
                    if depth == 0 {
                        return Err(CrawlError::SeedUnreachable { url: url.to_string(), reason: e.to_string() });
                    }
                    result.warnings.push(e.to_string());
                    continue;
                }
            };
            if !response.is_html() && !response.body.trim_start().starts_with('<') {
                result.warnings.push(format!("{url}: skipped non-HTML content ({})", response.content_type));
                continue;
            }
            let embedded = extract_embedded(&response.body, url);
            if embedded.skipped > 0 {
                result.warnings.push(format!("{url}: {} unparseable embedded block(s)", embedded.skipped));
            }
            if depth < limits.max_depth {
                for link in links(&response.body, url) {
                    if in_scope(&link) && robots.allows(link.path()) && seen.insert(link.clone()) {
                        next.push(link);
                    }
                }
            }
            result.pages.push(PageRecord {
                url: url.clone(),
                fetched_at: Utc::now(),
                text: visible_text(&response.body),
                html: response.body,
                embedded: embedded.items,
                depth,
            });
        }
        level = next;
        depth += 1;
    }
    result.fetched = log.into_inner().expect("log poisoned");
    Ok(result)
}

fn fetch_level(
    urls: &[Url],
    concurrency: usize,
    gate: &HostGate,
    fetcher: &dyn Fetcher,
    log: &Mutex<Vec<Url>>,
) -> Vec<Result<FetchResponse, FetchError>> {
    let next = Mutex::new(0usize);
    let slots: Vec<Mutex<Option<Result<FetchResponse, FetchError>>>> = urls.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..concurrency.max(1).min(urls.len()) {
            s.spawn(|| loop {
                let i = {
                    let mut n = next.lock().expect("queue poisoned");
                    let i = *n;
                    *n += 1;
                    i
                };
                if i >= urls.len() {
                    break;
                }
                let r = gate.fetch(fetcher, &urls[i], log);
                *slots[i].lock().expect("slot poisoned") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot poisoned").expect("every slot filled"))
        .collect()
}

/// A page section selected for a task.
#[derive(Debug, Clone, PartialEq)]
pub struct WebChunk {
    pub url: Url,
    pub heading: Option<String>,
    pub text: String,
    pub score: f64,
}

/// Sections of `pages` whose heading or body hits the task keywords, best
/// keyword density first. Long sections are split at sentence boundaries.
pub fn select_chunks(pages: &[PageRecord], task: Task) -> Vec<WebChunk> {
    let mut candidates = Vec::new();
    for page in pages {
        for section in page_sections(&page.html) {
            let chunk = Chunk {
                word_count: section.heading.as_deref().map_or(0, |h| h.split_whitespace().count())
                    + section.body.split_whitespace().count(),
                heading: section.heading,
                span: ChunkSpan { start: 0, end: section.body.len() },
                body: section.body.clone(),
                oversized: false,
            };
            for piece in frontmatter::semantic_split(&chunk, DEFAULT_BUDGET_WORDS, &section.body) {
                candidates.push((page.url.clone(), piece));
            }
        }
    }
    let scores: Vec<f64> =
        candidates.iter().map(|(_, c)| keywords::score(task, c.heading.as_deref(), &c.body)).collect();
    keywords::rank_by_score(&scores)
        .into_iter()
        .map(|i| {
            let (url, c) = &candidates[i];
            let text = match &c.heading {
                Some(h) => format!("{h}\n{}", c.body),
                None => c.body.clone(),
            };
            WebChunk { url: url.clone(), heading: c.heading.clone(), text, score: scores[i] }
        })
        .collect()
}

/// Selected chunks as extractor input.
pub fn source_chunks(conference_key: &str, pages: &[PageRecord], task: Task) -> Vec<SourceChunk> {
    select_chunks(pages, task)
        .into_iter()
        .map(|c| SourceChunk {
            conference_key: conference_key.to_string(),
            source_kind: SourceKind::Website,
            source_url: c.url,
            heading: c.heading,
            text: c.text,
            span: None,
        })
        .collect()
}

pub fn write_jsonl(pages: &[PageRecord], out: &mut impl Write) -> Result<(), CrawlError> {
    for p in pages {
        serde_json::to_writer(&mut *out, p)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(input: impl BufRead) -> Result<Vec<PageRecord>, CrawlError> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
