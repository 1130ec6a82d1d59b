//! SPARQL 1.1 Query Results JSON decoding.

use std::collections::BTreeMap;

use serde::Deserialize;

use super::SparqlError;

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TermKind {
    Uri,
    Literal,
    TypedLiteral,
    Bnode,
    Triple,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Term {
    #[serde(rename = "type")]
    pub kind: TermKind,
    #[serde(default)]
    pub value: serde_json::Value,
    #[serde(default)]
    pub datatype: Option<String>,
    #[serde(default, rename = "xml:lang")]
    pub lang: Option<String>,
}

impl Term {
    pub fn text(&self) -> String {
        match &self.value {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        }
    }
}

/// One solution; unbound (optional) variables are simply absent.
pub type Solution = BTreeMap<String, Term>;

#[derive(Deserialize)]
struct Head {
    #[serde(default)]
    vars: Vec<String>,
}

#[derive(Deserialize)]
struct Results {
    bindings: Vec<Solution>,
}

#[derive(Deserialize)]
struct Document {
    head: Head,
    results: Results,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub vars: Vec<String>,
    pub rows: Vec<Solution>,
}

pub fn decode(body: &str) -> Result<ResultSet, SparqlError> {
    let doc: Document = serde_json::from_str(body).map_err(|e| SparqlError::MalformedResults(e.to_string()))?;
    Ok(ResultSet { vars: doc.head.vars, rows: doc.results.bindings })
}

/// Text of `var` in `row`, if bound.
pub fn get(row: &Solution, var: &str) -> Option<String> {
    row.get(var).map(Term::text)
}
