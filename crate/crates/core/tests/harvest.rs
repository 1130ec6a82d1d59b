mod common;

use std::time::Duration;

use common::e2e;
use confmeta::records::{ReviewState, Task};
use confmeta::sparql::SubEventKind;
use confmeta::web::{self, CrawlLimits, OfflineFetcher, Syntax};
use url::Url;

fn site() -> (Url, OfflineFetcher) {
    let seed = Url::parse("https://semconf2024.example.org/").unwrap();
    (seed, OfflineFetcher::new(e2e::dir().join("site")))
}

fn limits() -> CrawlLimits {
    CrawlLimits { per_host_delay: Duration::ZERO, ..CrawlLimits::default() }
}

#[test]
fn crawl_stays_on_site_and_obeys_robots() {
    let (seed, fetcher) = site();
    let result = web::crawl(&seed, &limits(), &fetcher).unwrap();
    let mut paths: Vec<&str> = result.pages.iter().map(|p| p.url.path()).collect();
    paths.sort();
    assert_eq!(paths, ["/", "/dates.html", "/program/awards.html", "/sponsors.html"]);
    assert!(result.fetched.iter().all(|u| u.host_str() == seed.host_str()), "{:?}", result.fetched);
    assert!(!result.fetched.iter().any(|u| u.path().starts_with("/private/")));
    assert!(result.fetched.iter().any(|u| u.path() == "/robots.txt"));

    let home = result.pages.iter().find(|p| p.url.path() == "/").unwrap();
    assert!(home.embedded.iter().any(|i| i.syntax == Syntax::JsonLd && i.payload["name"] == "SemConf 2024"));
    assert!(home.embedded.iter().any(|i| i.syntax == Syntax::Opengraph));
    assert!(home.text.contains("Lisbon"));
    // Sitemap entries are queued at depth 1 alongside the nav links.
    assert!(result.pages.iter().filter(|p| p.url.path() != "/").all(|p| p.depth == 1));
}

#[test]
fn crawl_respects_page_budget() {
    let (seed, fetcher) = site();
    let result = web::crawl(&seed, &CrawlLimits { max_pages: 2, ..limits() }, &fetcher).unwrap();
    assert_eq!(result.pages.len(), 2);
    assert_eq!(result.pages[0].url, seed);
}

#[test]
fn unreachable_seed_is_an_error() {
    let (_, fetcher) = site();
    let seed = Url::parse("https://semconf2024.example.org/missing/").unwrap();
    assert!(matches!(web::crawl(&seed, &limits(), &fetcher), Err(web::CrawlError::SeedUnreachable { .. })));
}

#[test]
fn sparql_replay_decodes_papers_authors_and_subevents() {
    let dir = tempfile::tempdir().unwrap();
    let p = e2e::pipeline(dir.path());
    let conf = p.config.conference(e2e::CONFERENCE).unwrap().clone();
    let h = p.harvest_sparql(&conf).unwrap();

    assert_eq!(h.counters["papers"], 2);
    assert_eq!(h.counters["signatures"], 4);
    assert_eq!(h.counters["subevents"], 2);
    assert_eq!(h.counters["subevents_skipped"], 1);

    let papers: Vec<_> = h.records.iter().filter(|r| r.task == Task::Papers).collect();
    assert_eq!(papers.len(), 2);
    assert!(papers.iter().any(|r| r.cell("doi") == Some("https://doi.org/10.1000/semconf.2024.2")));

    let authors: Vec<_> = h.records.iter().filter(|r| r.task == Task::Authorships).collect();
    assert_eq!(authors.len(), 4);
    // Ordinals of a flagged paper are not 1..n, so its authors wait for review.
    let flagged = h.counters["flagged_papers"];
    let pending = authors.iter().filter(|r| r.review_state == ReviewState::NeedsReview).count();
    assert_eq!(flagged > 0, pending > 0);

    let mut kinds: Vec<_> = h.subevents.iter().map(|s| s.kind).collect();
    kinds.sort();
    assert_eq!(kinds, [SubEventKind::Workshop, SubEventKind::Tutorial]);
    assert!(h.subevents.iter().all(|s| s.parent == conf.conference_iri.clone().unwrap()));
}
