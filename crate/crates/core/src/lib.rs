//! Conference metadata pipeline: harvest conference websites, proceedings
//! front matter and SPARQL endpoints, extract facts with prompt-templated
//! LLM calls, reconcile entities, curate, and compile QuickStatements
//! batches for Wikidata.

pub mod model;
pub mod qs;
pub mod reconcile;
pub mod records;
pub mod extract;
pub mod frontmatter;
pub mod keywords;
pub mod web;
pub mod sparql;
pub mod eval;
pub mod store;
pub mod config;
pub mod curation;
pub mod pipeline;
pub mod report;
pub mod api;
