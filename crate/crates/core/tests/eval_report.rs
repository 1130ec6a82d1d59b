mod common;

use confmeta::eval::{align, micro_prf, AlignOptions, GoldItem};
use confmeta::model::MappingVocabulary;
use confmeta::qs::MappingSchema;
use confmeta::records::{row, ExtractionRecord, ReviewState, SourceKind, Task};
use confmeta::report::{report, to_csv, Metric};
use confmeta::store::{EventInfo, StoreState};
use proptest::prelude::*;
use url::Url;

fn record(conference: &str, name: &str, role: &str) -> ExtractionRecord {
    let url = Url::parse("https://example.org/").unwrap();
    ExtractionRecord::new(Task::Roles, conference, SourceKind::Website, url, row([("name", Some(name)), ("role", Some(role))]))
}

fn gold(conference: &str, name: &str, role: &str, in_text: bool) -> GoldItem {
    GoldItem {
        task: Task::Roles,
        conference_key: conference.into(),
        fields: row([("name", Some(name)), ("role", Some(role))]),
        in_text,
        note: (!in_text).then(|| "not on the page".into()),
    }
}

fn roles_item() -> impl Strategy<Value = (String, String, String)> {
    (prop::sample::select(vec!["c1", "c2"]), prop::sample::select(vec!["Ann Lee", "Bo Chen", "Cy Dunn", "Di Ek"]), prop::sample::select(vec!["general chair", "pc chair"]))
        .prop_map(|(c, n, r)| (c.to_string(), n.to_string(), r.to_string()))
}

proptest! {
    #[test]
    fn f1_lies_between_precision_and_recall(tp in 0u64..500, fp in 0u64..500, fn_ in 0u64..500) {
        let (p, r, f1) = micro_prf(tp, fp, fn_);
        prop_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&r));
        if tp > 0 {
            prop_assert!(p.min(r) <= f1 + 1e-12 && f1 <= p.max(r) + 1e-12);
        }
    }

    #[test]
    fn alignment_ignores_order_and_balances(
        ext in prop::collection::vec(roles_item(), 0..12),
        gld in prop::collection::vec((roles_item(), any::<bool>()), 0..12),
        seed in any::<u64>(),
    ) {
        let ext: Vec<_> = ext.iter().map(|(c, n, r)| record(c, n, r)).collect();
        let gld: Vec<_> = gld.iter().map(|((c, n, r), t)| gold(c, n, r, *t)).collect();
        let a = align(&ext, &gld, Task::Roles, AlignOptions::default()).unwrap();

        let rot = |n: usize| if n == 0 { 0 } else { (seed as usize) % n };
        let mut ext2 = ext.clone();
        ext2.rotate_left(rot(ext.len()));
        ext2.reverse();
        let mut gld2 = gld.clone();
        gld2.rotate_left(rot(gld.len()));
        let b = align(&ext2, &gld2, Task::Roles, AlignOptions::default()).unwrap();
        prop_assert_eq!((a.tp, a.fp, a.fn_), (b.tp, b.fp, b.fn_));

        prop_assert_eq!(a.tp + a.fp, ext.len() as u64);
        let in_text = gld.iter().filter(|g| g.in_text).count() as u64;
        prop_assert!(a.fn_ <= in_text);
        prop_assert!(a.tp + a.fn_ <= gld.len() as u64);
    }
}

#[test]
fn absent_gold_fact_is_neither_hit_nor_miss() {
    let ext = [record("c1", "Ann Lee", "general chair")];
    let gld = [gold("c1", "Ann Lee", "general chair", true), gold("c1", "Bo Chen", "pc chair", false)];
    let a = align(&ext, &gld, Task::Roles, AlignOptions::default()).unwrap();
    assert_eq!((a.tp, a.fp, a.fn_), (1, 0, 0));
}

fn counts(state: &mut StoreState, key: &str, track: &str, s: &str, a: &str, review: ReviewState) {
    let url = Url::parse("https://example.org/").unwrap();
    let mut r = ExtractionRecord::new(
        Task::Counts,
        key,
        SourceKind::FrontMatter,
        url,
        row([("track", Some(track)), ("submitted", Some(s)), ("accepted", Some(a))]),
    );
    r.review_state = review;
    state.records.insert(r.id.clone(), r);
}

#[test]
fn acceptance_rate_series() {
    let mut st = StoreState::default();
    for (key, year) in [("kgc2021", 2021), ("kgc2022", 2022), ("kgc2023", 2023), ("kgc2024", 2024)] {
        let info = EventInfo { key: key.into(), series: "kgc".into(), label: key.to_uppercase(), year, participants: None };
        st.events.insert(key.into(), info);
    }
    // 35 of 150 across two tracks.
    counts(&mut st, "kgc2021", "research", "100", "25", ReviewState::AutoOk);
    counts(&mut st, "kgc2021", "resource", "50", "10", ReviewState::Approved);
    // An overall row wins over track rows: 50 of 200.
    counts(&mut st, "kgc2022", "research", "150", "40", ReviewState::AutoOk);
    counts(&mut st, "kgc2022", "overall", "200", "50", ReviewState::AutoOk);
    // Pending and rejected rows are not reported: 1 of 3.
    counts(&mut st, "kgc2023", "research", "3", "1", ReviewState::Edited);
    counts(&mut st, "kgc2023", "resource", "90", "9", ReviewState::NeedsReview);
    counts(&mut st, "kgc2023", "in-use", "90", "9", ReviewState::Rejected);
    // kgc2024 has no counts and is skipped.

    let csv = to_csv(&report(&st, "KGC", Metric::AcceptanceRate), Metric::AcceptanceRate);
    assert_eq!(csv, "event,year,acceptance_rate\nKGC2021,2021,23.3\nKGC2022,2022,25.0\nKGC2023,2023,33.3\n");
    let csv = to_csv(&report(&st, "kgc", Metric::Submissions), Metric::Submissions);
    assert_eq!(csv, "event,year,submissions\nKGC2021,2021,150\nKGC2022,2022,200\nKGC2023,2023,3\n");
}

#[test]
fn shipped_schemas_bind_to_the_shipped_vocabulary() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("config");
    let vocab = MappingVocabulary::load(&root.join("vocabulary.json")).unwrap();
    assert_eq!(vocab, MappingVocabulary::builtin());
    for name in ["event.json", "papers.json"] {
        let schema = MappingSchema::load(&root.join("schemas").join(name)).unwrap();
        schema.check(&vocab).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
