//! Proceedings front matter: text normalization, heading sections and
//! sentence-bounded splitting.

mod adapter;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use url::Url;

use crate::extract::SourceChunk;
use crate::keywords;
use crate::records::{ChunkSpan, SourceKind, Task};

pub use adapter::{PdfTextAdapter, PdftotextAdapter};

pub const DEFAULT_BUDGET_WORDS: usize = 1500;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("pdf extraction: {0}")]
    Pdf(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub heading: Option<String>,
    pub body: String,
    pub span: ChunkSpan,
    pub word_count: usize,
    /// A single sentence longer than the budget, emitted on its own.
    #[serde(default)]
    pub oversized: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontMatterDoc {
    pub conference_key: String,
    pub source_url: Url,
    pub raw_text: String,
    pub normalized_text: String,
    pub chunks: Vec<Chunk>,
}

static DEHYPHEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(\p{L})-\n(\p{Ll})").unwrap());
static BLANKS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\n{3,}").unwrap());

fn expand_ligature(c: char) -> Option<&'static str> {
    Some(match c {
        '\u{FB00}' => "ff",
        '\u{FB01}' => "fi",
        '\u{FB02}' => "fl",
        '\u{FB03}' => "ffi",
        '\u{FB04}' => "ffl",
        '\u{FB05}' | '\u{FB06}' => "st",
        _ => return None,
    })
}

fn normalize_once(raw: &str) -> String {
    let mut s = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            '\u{00AD}' => {}
            '\r' => {}
            c if expand_ligature(c).is_some() => s.push_str(expand_ligature(c).unwrap_or_default()),
            c => s.push(c),
        }
    }
    let lines: Vec<String> =
        s.split('\n').map(|l| l.split_whitespace().collect::<Vec<_>>().join(" ")).collect();
    let s = lines.join("\n");
    let s = DEHYPHEN.replace_all(&s, "$1$2");
    let s = BLANKS.replace_all(&s, "\n\n");
    s.trim_matches('\n').to_string()
}

/// Expands ligatures, removes soft hyphens, joins words hyphenated across
/// line breaks and collapses whitespace. Line structure is kept so that
/// headings stay detectable. Idempotent.
pub fn normalize_text(raw: &str) -> String {
    let mut cur = normalize_once(raw);
    loop {
        let next = normalize_once(&cur);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

const SMALL_WORDS: [&str; 14] = ["a", "an", "and", "as", "at", "by", "for", "in", "of", "on", "or", "the", "to", "with"];

/// A heading is a short title-cased or all-caps line without trailing
/// punctuation or commas.
pub fn is_heading(line: &str) -> bool {
    let line = line.trim();
    let words: Vec<&str> = line.split_whitespace().collect();
    if words.is_empty() || words.len() > 8 || line.contains(',') {
        return false;
    }
    if line.ends_with(['.', ',', ':', ';', '!', '?']) || !line.chars().any(char::is_alphabetic) {
        return false;
    }
    let letters: Vec<char> = line.chars().filter(|c| c.is_alphabetic()).collect();
    let all_caps = letters.iter().all(|c| c.is_uppercase()) && letters.len() > 1;
    let title = words.iter().enumerate().all(|(i, w)| {
        let first = w.chars().find(|c| c.is_alphanumeric() || *c == '&');
        match first {
            None => true,
            Some(c) if c.is_uppercase() || c.is_numeric() || c == '&' => true,
            Some(_) => i > 0 && SMALL_WORDS.contains(&w.to_lowercase().as_str()),
        }
    });
    all_caps || title
}

fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

fn make_chunk(text: &str, heading: Option<&str>, start: usize, body_start: usize, end: usize) -> Option<Chunk> {
    let body = text[body_start..end].trim().to_string();
    let heading = heading.map(str::to_string);
    let words = word_count(&body) + heading.as_deref().map_or(0, word_count);
    if words == 0 {
        return None;
    }
    let end = start + text[start..end].trim_end().len();
    Some(Chunk { heading, body, span: ChunkSpan { start, end }, word_count: words, oversized: false })
}

/// Splits normalized text into one chunk per heading section. Text before
/// the first heading forms its own chunk. A heading must start the
/// document or follow a blank line.
pub fn chunk_by_headings(text: &str) -> Vec<Chunk> {
    let mut sections: Vec<(usize, usize, Option<&str>)> = Vec::new();
    let mut offset = 0;
    let mut prev_blank = true;
    for line in text.split('\n') {
        let trimmed = line.trim();
        if prev_blank && is_heading(trimmed) {
            sections.push((offset, offset + line.len(), Some(trimmed)));
        }
        prev_blank = trimmed.is_empty();
        offset += line.len() + 1;
    }
    let mut out = Vec::new();
    let first = sections.first().map_or(text.len(), |s| s.0);
    out.extend(make_chunk(text, None, 0, 0, first));
    for (i, &(start, heading_end, heading)) in sections.iter().enumerate() {
        let end = sections.get(i + 1).map_or(text.len(), |s| s.0);
        let body_start = (heading_end + 1).min(end);
        out.extend(make_chunk(text, heading, start, body_start, end));
    }
    out
}

static SENTENCE_END: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[.!?]+[\s]+|\n+").unwrap());

/// Sentence spans of `body` as byte ranges, whitespace excluded.
fn sentences(body: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for m in SENTENCE_END.find_iter(body) {
        let end = start.max(m.start() + m.as_str().trim_end().len());
        if body[start..end].trim().is_empty() {
            start = m.end();
            continue;
        }
        out.push((start, end));
        start = m.end();
    }
    if !body[start..].trim().is_empty() {
        out.push((start, start + body[start..].trim_end().len()));
    }
    out
}

/// Splits a chunk at sentence boundaries so each piece fits
/// `budget_words` (heading included). Consecutive pieces share one
/// sentence. A sentence that alone exceeds the budget becomes its own
/// piece marked `oversized`.
pub fn semantic_split(chunk: &Chunk, budget_words: usize, text: &str) -> Vec<Chunk> {
    assert!(budget_words > 0, "budget must be positive");
    if chunk.word_count <= budget_words {
        return vec![chunk.clone()];
    }
    let body_start = chunk.span.start + text[chunk.span.start..chunk.span.end].find(chunk.body.as_str()).unwrap_or(0);
    let heading_words = chunk.heading.as_deref().map_or(0, word_count);
    let avail = budget_words.saturating_sub(heading_words).max(1);
    let sents = sentences(&chunk.body);
    let words: Vec<usize> = sents.iter().map(|&(a, b)| word_count(&chunk.body[a..b])).collect();

    let piece = |from: usize, to: usize, oversized: bool| {
        let (a, b) = (sents[from].0, sents[to - 1].1);
        let body = chunk.body[a..b].to_string();
        Chunk {
            heading: chunk.heading.clone(),
            word_count: word_count(&body) + heading_words,
            body,
            span: ChunkSpan { start: body_start + a, end: body_start + b },
            oversized,
        }
    };

    let mut out = Vec::new();
    let mut i = 0;
    while i < sents.len() {
        if words[i] > avail {
            out.push(piece(i, i + 1, true));
            i += 1;
            continue;
        }
        // Carry the previous sentence over unless it would not fit.
        let mut from = i;
        if i > 0 && words[i - 1] <= avail && words[i - 1] + words[i] <= avail && !out.last().is_some_and(|c: &Chunk| c.oversized) {
            from = i - 1;
        }
        let mut total: usize = words[from..i].iter().sum();
        let mut to = i;
        while to < sents.len() && words[to] <= avail && total + words[to] <= avail {
            total += words[to];
            to += 1;
        }
        out.push(piece(from, to, false));
        i = to;
    }
    out
}

/// Chunks relevant to `task`, best keyword density first.
pub fn select_chunks(chunks: &[Chunk], task: Task) -> Vec<Chunk> {
    let scores: Vec<f64> = chunks.iter().map(|c| keywords::score(task, c.heading.as_deref(), &c.body)).collect();
    keywords::rank_by_score(&scores).into_iter().map(|i| chunks[i].clone()).collect()
}

impl FrontMatterDoc {
    /// Normalizes, sections and splits `raw_text`.
    pub fn ingest(conference_key: impl Into<String>, source_url: Url, raw_text: String, budget_words: usize) -> Self {
        let normalized_text = normalize_text(&raw_text);
        let chunks = chunk_by_headings(&normalized_text)
            .iter()
            .flat_map(|c| semantic_split(c, budget_words, &normalized_text))
            .collect();
        FrontMatterDoc { conference_key: conference_key.into(), source_url, raw_text, normalized_text, chunks }
    }

    /// Selected chunks for `task` as provider input.
    pub fn source_chunks(&self, task: Task) -> Vec<SourceChunk> {
        select_chunks(&self.chunks, task)
            .into_iter()
            .map(|c| SourceChunk {
                conference_key: self.conference_key.clone(),
                source_kind: SourceKind::FrontMatter,
                source_url: self.source_url.clone(),
                text: match &c.heading {
                    Some(h) if !c.body.starts_with(h.as_str()) => format!("{h}\n{}", c.body),
                    _ => c.body.clone(),
                },
                heading: c.heading,
                span: Some(c.span),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub source_url: Url,
}

/// `conference_key → {path, source_url}`; relative paths resolve against
/// the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<BTreeMap<String, ManifestEntry>, IngestError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| IngestError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    let mut m: BTreeMap<String, ManifestEntry> =
        serde_json::from_str(&text).map_err(|e| IngestError::Manifest(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for entry in m.values_mut() {
        if entry.path.is_relative() {
            entry.path = base.join(&entry.path);
        }
    }
    Ok(m)
}

/// Reads a text file, or a PDF through `pdf` when the extension says so.
pub fn read_source(path: &Path, pdf: Option<&dyn PdfTextAdapter>) -> Result<String, IngestError> {
    let is_pdf = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pdf"));
    match (is_pdf, pdf) {
        (true, Some(adapter)) => adapter.extract_text(path),
        (true, None) => Err(IngestError::Pdf(format!("{}: no PDF adapter configured", path.display()))),
        (false, _) => std::fs::read_to_string(path)
            .map_err(|e| IngestError::Io { path: path.to_path_buf(), message: e.to_string() }),
    }
}
