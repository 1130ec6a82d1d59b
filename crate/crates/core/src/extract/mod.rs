//! Prompt-templated extraction: render the task prompt, call a provider,
//! parse the CSV answer and ground every cell against the chunk it came
//! from.

mod dates;
mod ground;
mod parse;
mod provider;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::records::{ChunkSpan, ExtractionRecord, Grounding, ReviewState, SourceKind, Task};

pub use dates::{find_dates, parse_date, DateMention};
pub use ground::{cell_class, fold, ground_check, number_tokens, CellClass, Source};
pub use parse::{parse_output, ParseError, SENTINEL};
pub use provider::{
    extract_text, CompletionRequest, HttpProvider, MockProvider, Provider, ProviderConfig, ProviderError, WireFormat,
};

const SYSTEM: &str = include_str!("../../prompts/counts.system.txt");

fn human_template(task: Task) -> Option<(&'static str, &'static str)> {
    Some(match task {
        Task::Counts => (include_str!("../../prompts/counts.human.txt"), "{preface_text}"),
        Task::Roles => (include_str!("../../prompts/roles.human.txt"), "{source_text}"),
        Task::PcMembers => (include_str!("../../prompts/pc_members.human.txt"), "{source_text}"),
        Task::Deadlines => (include_str!("../../prompts/deadlines.human.txt"), "{source_text}"),
        Task::Sponsors => (include_str!("../../prompts/sponsors.human.txt"), "{source_text}"),
        Task::Awards => (include_str!("../../prompts/awards.human.txt"), "{source_text}"),
        Task::Papers | Task::Authorships => return None,
    })
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("task {0} is not extracted from text")]
    UnknownTask(Task),
    #[error("source text is empty")]
    EmptySource,
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPair {
    pub system: String,
    pub human: String,
    pub task: Task,
    pub shot_count: u32,
}

/// Renders the system and human messages for `task` over `source_text`.
pub fn render_prompt(task: Task, source_text: &str) -> Result<PromptPair, ExtractError> {
    if source_text.trim().is_empty() {
        return Err(ExtractError::EmptySource);
    }
    let (template, slot) = human_template(task).ok_or(ExtractError::UnknownTask(task))?;
    let (head, tail) = template.split_once(slot).expect("template has a source slot");
    let human = format!("{head}{source_text}{tail}");
    Ok(PromptPair { system: SYSTEM.to_string(), human, task, shot_count: 2 })
}

/// A piece of source text handed to the provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceChunk {
    pub conference_key: String,
    pub source_kind: SourceKind,
    pub source_url: Url,
    #[serde(default)]
    pub heading: Option<String>,
    pub text: String,
    #[serde(default)]
    pub span: Option<ChunkSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkError {
    pub chunk_index: usize,
    pub source_url: Url,
    pub error: ParseError,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractOutcome {
    pub records: Vec<ExtractionRecord>,
    pub errors: Vec<ChunkError>,
}

/// Runs `task` over every chunk. Parse failures are collected per chunk;
/// a provider failure aborts. Rows seen in several chunks become one
/// record whose cells count as grounded if any chunk grounds them.
pub fn extract(
    task: Task,
    chunks: &[SourceChunk],
    provider: &dyn Provider,
    concurrency: usize,
) -> Result<ExtractOutcome, ExtractError> {
    if !task.is_text_task() {
        return Err(ExtractError::UnknownTask(task));
    }
    let prompts: Vec<PromptPair> = chunks.iter().map(|c| render_prompt(task, &c.text)).collect::<Result<_, _>>()?;
    let responses = run_all(&prompts, chunks, provider, concurrency.max(1))?;

    let mut out = ExtractOutcome::default();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (i, (chunk, response)) in chunks.iter().zip(responses).enumerate() {
        let rows = match parse_output(&response, task) {
            Ok(rows) => rows,
            Err(error) => {
                log::warn!("chunk {i} of {}: {error}", chunk.conference_key);
                out.errors.push(ChunkError { chunk_index: i, source_url: chunk.source_url.clone(), error });
                continue;
            }
        };
        let source = Source::new(&chunk.text);
        for row in rows {
            let grounding = source.ground_row(task, &row);
            let mut record =
                ExtractionRecord::new(task, &chunk.conference_key, chunk.source_kind, chunk.source_url.clone(), row);
            record.chunk_span = chunk.span;
            record.model = Some(provider.model().to_string());
            match index.get(&record.id) {
                Some(&at) => {
                    let kept = &mut out.records[at];
                    // Cite the first chunk that grounds the whole row.
                    let ungrounded = |g: &BTreeMap<String, Grounding>| g.values().any(|g| *g == Grounding::Ungrounded);
                    if ungrounded(&kept.grounding) && !ungrounded(&grounding) {
                        kept.source_url = record.source_url;
                        kept.chunk_span = record.chunk_span;
                    }
                    merge_grounding(&mut kept.grounding, &grounding);
                }
                None => {
                    record.grounding = grounding;
                    index.insert(record.id.clone(), out.records.len());
                    out.records.push(record);
                }
            }
        }
    }
    for r in &mut out.records {
        r.review_state = if r.has_ungrounded() { ReviewState::NeedsReview } else { ReviewState::AutoOk };
    }
    Ok(out)
}

fn merge_grounding(into: &mut BTreeMap<String, Grounding>, other: &BTreeMap<String, Grounding>) {
    for (col, g) in other {
        if *g == Grounding::Grounded {
            into.insert(col.clone(), Grounding::Grounded);
        }
    }
}

fn run_all(
    prompts: &[PromptPair],
    chunks: &[SourceChunk],
    provider: &dyn Provider,
    concurrency: usize,
) -> Result<Vec<String>, ProviderError> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<String, ProviderError>>>> = Mutex::new(vec![None; prompts.len()]);
    std::thread::scope(|s| {
        for _ in 0..concurrency.min(prompts.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= prompts.len() {
                    break;
                }
                let req = CompletionRequest { prompt: &prompts[i], conference_key: &chunks[i].conference_key };
                let r = provider.complete(&req);
                results.lock().expect("result slots")[i] = Some(r);
            });
        }
    });
    results.into_inner().expect("result slots").into_iter().map(|r| r.expect("every chunk answered")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_prompt_has_both_shots_and_sentinel() {
        let p = render_prompt(Task::Counts, "The conference received 10 submissions.").unwrap();
        assert!(p.human.contains("track, submitted, accepted"));
        assert!(p.human.contains("research, 98, 19"));
        assert!(p.human.contains("PhD symposium, - , 10"));
        assert!(p.human.contains("\"--- complete ----\" as the last line"));
        assert!(p.human.ends_with("Preface: The conference received 10 submissions."));
        assert_eq!(p.human.matches("The conference received 10 submissions.").count(), 1);
        assert!(p.system.starts_with("You are a data entry clerk"));
        assert_eq!(p.shot_count, 2);
    }

    #[test]
    fn every_text_task_has_a_template() {
        for task in Task::TEXT {
            let p = render_prompt(task, "x").unwrap();
            assert!(p.human.contains(SENTINEL), "{task}");
            assert!(p.human.contains(&task.columns().join(", ")), "{task}");
            assert!(!p.human.contains("{source_text}"));
        }
        assert!(matches!(render_prompt(Task::Papers, "x"), Err(ExtractError::UnknownTask(_))));
        assert!(matches!(render_prompt(Task::Counts, "  "), Err(ExtractError::EmptySource)));
    }

    #[test]
    fn template_examples_parse_with_their_own_parser() {
        for task in Task::TEXT {
            let (template, _) = human_template(task).unwrap();
            for block in template.split("Output:\n").skip(1) {
                let end = block.find(SENTINEL).unwrap() + SENTINEL.len();
                let rows = parse_output(&block[..end], task).unwrap();
                assert!(!rows.is_empty(), "{task}");
            }
        }
    }
}
