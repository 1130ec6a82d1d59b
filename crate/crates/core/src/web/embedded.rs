//! Structured data embedded in pages: JSON-LD, OpenGraph, Microdata, RDFa.

use scraper::{ElementRef, Html, Selector};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use url::Url;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Syntax {
    Microdata,
    JsonLd,
    Rdfa,
    Opengraph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredItem {
    pub syntax: Syntax,
    pub payload: Value,
    pub source_url: Url,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Embedded {
    pub items: Vec<StructuredItem>,
    /// Blocks that could not be parsed.
    pub skipped: usize,
}

fn sel(s: &str) -> Selector {
    Selector::parse(s).expect("static selector")
}

fn insert(map: &mut Map<String, Value>, key: &str, value: Value) {
    match map.get_mut(key) {
        None => {
            map.insert(key.to_string(), value);
        }
        Some(Value::Array(a)) => a.push(value),
        Some(old) => {
            let prev = old.take();
            *old = Value::Array(vec![prev, value]);
        }
    }
}

fn text_of(el: ElementRef) -> String {
    el.text().collect::<String>().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Nearest proper ancestor element carrying any of `attrs`.
fn scope_of<'a>(el: ElementRef<'a>, attrs: &[&str]) -> Option<ElementRef<'a>> {
    el.ancestors()
        .filter_map(ElementRef::wrap)
        .find(|a| attrs.iter().any(|n| a.value().attr(n).is_some()))
}

fn resolve(base: &Url, raw: &str) -> String {
    base.join(raw.trim()).map(String::from).unwrap_or_else(|_| raw.trim().to_string())
}

fn microdata_value(el: ElementRef, base: &Url) -> Value {
    if el.value().attr("itemscope").is_some() {
        return microdata_item(el, base);
    }
    let v = el.value();
    let raw = match v.name() {
        "meta" => v.attr("content").map(str::to_string),
        "a" | "link" | "area" => v.attr("href").map(|h| resolve(base, h)),
        "img" | "audio" | "video" | "source" | "iframe" | "embed" => v.attr("src").map(|h| resolve(base, h)),
        "object" => v.attr("data").map(|h| resolve(base, h)),
        "time" => v.attr("datetime").map(str::to_string),
        "data" | "meter" => v.attr("value").map(str::to_string),
        _ => None,
    };
    Value::String(raw.unwrap_or_else(|| text_of(el)))
}

fn microdata_item(scope: ElementRef, base: &Url) -> Value {
    let mut map = Map::new();
    if let Some(t) = scope.value().attr("itemtype") {
        map.insert("@type".into(), Value::String(t.trim().to_string()));
    }
    if let Some(id) = scope.value().attr("itemid") {
        map.insert("@id".into(), Value::String(resolve(base, id)));
    }
    for prop in scope.select(&sel("[itemprop]")) {
        if scope_of(prop, &["itemscope"]).map(|s| s.id()) != Some(scope.id()) {
            continue;
        }
        let value = microdata_value(prop, base);
        for name in prop.value().attr("itemprop").unwrap_or("").split_whitespace() {
            insert(&mut map, name, value.clone());
        }
    }
    Value::Object(map)
}

fn rdfa_value(el: ElementRef, base: &Url) -> Value {
    if el.value().attr("typeof").is_some() {
        return rdfa_item(el, base);
    }
    let v = el.value();
    let raw = v
        .attr("content")
        .map(str::to_string)
        .or_else(|| v.attr("resource").or(v.attr("href")).or(v.attr("src")).map(|h| resolve(base, h)));
    Value::String(raw.unwrap_or_else(|| text_of(el)))
}

fn rdfa_item(scope: ElementRef, base: &Url) -> Value {
    let mut map = Map::new();
    let v = scope.value();
    if let Some(vocab) = v.attr("vocab") {
        map.insert("@vocab".into(), Value::String(vocab.trim().to_string()));
    }
    if let Some(t) = v.attr("typeof") {
        map.insert("@type".into(), Value::String(t.trim().to_string()));
    }
    if let Some(r) = v.attr("resource").or(v.attr("about")) {
        map.insert("@id".into(), Value::String(resolve(base, r)));
    }
    for prop in scope.select(&sel("[property]")) {
        if scope_of(prop, &["typeof", "vocab"]).map(|s| s.id()) != Some(scope.id()) {
            continue;
        }
        let value = rdfa_value(prop, base);
        for name in prop.value().attr("property").unwrap_or("").split_whitespace() {
            insert(&mut map, name, value.clone());
        }
    }
    Value::Object(map)
}

/// One item per top-level block: each JSON-LD script, the page's OpenGraph
/// tags together, each outermost Microdata `itemscope` and each outermost
/// RDFa `typeof`/`vocab` element.
pub fn extract_embedded(html: &str, base_url: &Url) -> Embedded {
    let doc = Html::parse_document(html);
    let mut out = Embedded::default();
    let item = |syntax, payload| StructuredItem { syntax, payload, source_url: base_url.clone() };

    for script in doc.select(&sel("script")) {
        let ty = script.value().attr("type").unwrap_or("").trim().to_ascii_lowercase();
        if ty != "application/ld+json" {
            continue;
        }
        let body: String = script.text().collect();
        match serde_json::from_str::<Value>(body.trim()) {
            Ok(v) => out.items.push(item(Syntax::JsonLd, v)),
            Err(e) => {
                log::warn!("{base_url}: unparseable JSON-LD block: {e}");
                out.skipped += 1;
            }
        }
    }

    let mut og = Map::new();
    for meta in doc.select(&sel("meta[property][content]")) {
        let v = meta.value();
        let prop = v.attr("property").unwrap_or("").trim();
        if prop.starts_with("og:") {
            insert(&mut og, prop, Value::String(v.attr("content").unwrap_or("").to_string()));
        }
    }
    if !og.is_empty() {
        out.items.push(item(Syntax::Opengraph, Value::Object(og)));
    }

    for scope in doc.select(&sel("[itemscope]")) {
        if scope.value().attr("itemprop").is_none() && scope_of(scope, &["itemscope"]).is_none() {
            out.items.push(item(Syntax::Microdata, microdata_item(scope, base_url)));
        }
    }

    for scope in doc.select(&sel("[typeof], [vocab]")) {
        if scope.value().attr("property").is_none() && scope_of(scope, &["typeof", "vocab"]).is_none() {
            out.items.push(item(Syntax::Rdfa, rdfa_item(scope, base_url)));
        }
    }
    out
}
