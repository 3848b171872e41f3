use std::sync::Arc;

use chrono::{TimeZone, Utc};
use tabsync_core::corpus::LanguageCode;
use tabsync_core::update::{Direction, EditProposal, EditType, Evidence, Rule};
use tabsync_service::fixtures::{published_proposals, published_records, write_published_journal, FLOW_COUNTS, TYPE_COUNTS};
use tabsync_service::{
    render_description, AcceptanceStats, Citation, Clock, Decision, FixedClock, RecordFilter, ReviewStore, ServiceError, Status,
};

fn clock() -> Arc<FixedClock> {
    Arc::new(FixedClock::new(Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()))
}

fn proposal(rule: Rule, n: usize) -> EditProposal {
    let edit_type = rule.edit_type();
    let mut p = EditProposal {
        id: String::new(),
        rule,
        edit_type,
        direction: Direction::new(LanguageCode::En, LanguageCode::Hi),
        entity_id: "Albert Einstein".into(),
        key: "population".into(),
        source_key: "population".into(),
        src_row: Some(n),
        tgt_row: (edit_type != EditType::RowAddition).then_some(0),
        deleted_rows: vec![],
        old: if edit_type == EditType::RowAddition { vec![] } else { vec!["1,350,000 (2018)".into()] },
        new: vec!["1,400,000 (2021)".into()],
        evidence: Evidence::default(),
    };
    p.id = p.content_id();
    p
}

fn cite() -> Option<Citation> {
    Some(Citation { url: "https://example.org/census".into(), note: "census".into() })
}

#[test]
fn enqueue_is_idempotent_and_checks_content() {
    let store = ReviewStore::in_memory(clock());
    let ps: Vec<_> = (0..3).map(|n| proposal(Rule::R1, n)).collect();
    assert_eq!(store.enqueue(&ps).unwrap().len(), 3);
    assert_eq!(store.records().len(), 3);
    store.enqueue(&ps).unwrap();
    assert_eq!(store.records().len(), 3);
    assert!(store.records().iter().all(|r| r.status == Status::Pending));

    let mut clash = ps[0].clone();
    clash.new = vec!["other".into()];
    assert!(matches!(store.enqueue(&[clash]), Err(ServiceError::Conflict(_))));
    let mut bad = proposal(Rule::R3, 9);
    bad.tgt_row = None;
    assert!(matches!(store.enqueue(&[bad]), Err(ServiceError::Invalid { .. })));
    assert_eq!(store.records().len(), 3);
}

#[test]
fn descriptions() {
    let sub = proposal(Rule::R3, 0);
    let text = render_description(&sub, "https://en.wikipedia.org/wiki/Albert_Einstein").unwrap();
    for needle in ["https://en.wikipedia.org/wiki/Albert_Einstein", "population", "1,350,000 (2018)", "1,400,000 (2021)", "ValueSubstitute", "en"] {
        assert!(text.contains(needle), "{needle} missing from\n{text}");
    }
    let add = render_description(&proposal(Rule::R1, 0), "https://x").unwrap();
    assert!(add.contains("RowAddition") && !add.contains("Current value"));
    assert!(matches!(render_description(&sub, " "), Err(ServiceError::MissingUrl)));

    let store = ReviewStore::in_memory(clock());
    store.enqueue(std::slice::from_ref(&sub)).unwrap();
    assert!(store.get(&sub.id).unwrap().description.contains("https://en.wikipedia.org/wiki/Albert_Einstein"));
}

#[test]
fn decision_state_machine() {
    let c = clock();
    let store = ReviewStore::in_memory(c.clone());
    let ps: Vec<_> = (0..3).map(|n| proposal(Rule::R1, n)).collect();
    store.enqueue(&ps).unwrap();

    let before = store.get(&ps[0].id).unwrap();
    assert!(matches!(store.decide(&ps[0].id, Decision::Accept, None, "ann"), Err(ServiceError::MissingCitation(_))));
    let blank = Some(Citation { url: "  ".into(), note: String::new() });
    assert!(matches!(store.decide(&ps[0].id, Decision::Accept, blank, "ann"), Err(ServiceError::MissingCitation(_))));
    assert_eq!(store.get(&ps[0].id).unwrap(), before);

    c.set(Utc.with_ymd_and_hms(2024, 2, 1, 0, 0, 0).unwrap());
    let r = store.decide(&ps[0].id, Decision::Accept, cite(), "ann").unwrap();
    assert_eq!((r.status, r.decided_at, r.reviewer.as_deref()), (Status::Accepted, Some(c.now()), Some("ann")));
    assert!(matches!(store.decide(&ps[0].id, Decision::Reject, None, "bob"), Err(ServiceError::AlreadyDecided(_))));
    let r = store.decide(&ps[1].id, Decision::Reject, None, "bob").unwrap();
    assert_eq!(r.status, Status::Rejected);
    assert!(matches!(store.decide("nope", Decision::Reject, None, "bob"), Err(ServiceError::NotFound(_))));
}

#[test]
fn parallel_decisions_on_one_record() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(ReviewStore::open(dir.path().join("journal.jsonl"), clock()).unwrap());
    let p = proposal(Rule::R3, 0);
    store.enqueue(std::slice::from_ref(&p)).unwrap();
    let handles: Vec<_> = (0..100)
        .map(|i| {
            let (store, id) = (store.clone(), p.id.clone());
            std::thread::spawn(move || {
                let d = if i % 2 == 0 { Decision::Accept } else { Decision::Reject };
                store.decide(&id, d, cite(), &format!("r{i}"))
            })
        })
        .collect();
    let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    assert_eq!(results.iter().filter(|r| r.is_ok()).count(), 1);
    assert_eq!(results.iter().filter(|r| matches!(r, Err(ServiceError::AlreadyDecided(_)))).count(), 99);
    let text = std::fs::read_to_string(dir.path().join("journal.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn restart_keeps_records_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.jsonl");
    let ps: Vec<_> = (0..5).map(|n| proposal(if n % 2 == 0 { Rule::R1 } else { Rule::R5 }, n)).collect();
    let (records, stats) = {
        let store = ReviewStore::open(&path, clock()).unwrap();
        store.enqueue(&ps).unwrap();
        store.decide(&ps[0].id, Decision::Accept, cite(), "a").unwrap();
        store.decide(&ps[1].id, Decision::Reject, None, "a").unwrap();
        store.export_accepted(&RecordFilter::default(), |_| Ok(())).unwrap();
        (store.records(), store.stats(&RecordFilter::default()))
    };
    let store = ReviewStore::open(&path, clock()).unwrap();
    assert_eq!(store.records(), records);
    assert_eq!(store.stats(&RecordFilter::default()), stats);
    // Compaction leaves one line per record, byte-identical to a fresh dump.
    let text = std::fs::read_to_string(&path).unwrap();
    let expected: String = records.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
    assert_eq!(text, expected);

    // A torn trailing append is dropped, not fatal.
    std::fs::write(&path, format!("{text}{{\"proposal\":")).unwrap();
    assert_eq!(ReviewStore::open(&path, clock()).unwrap().records(), records);
}

#[test]
fn export_once_and_only_accepted() {
    let store = ReviewStore::in_memory(clock());
    let ps: Vec<_> = (0..4).map(|n| proposal(Rule::R1, n)).collect();
    store.enqueue(&ps).unwrap();
    store.decide(&ps[0].id, Decision::Accept, cite(), "a").unwrap();
    store.decide(&ps[1].id, Decision::Accept, cite(), "a").unwrap();
    store.decide(&ps[2].id, Decision::Reject, None, "a").unwrap();

    let failed = store.export_accepted(&RecordFilter::default(), |_| Err(std::io::Error::other("disk full")));
    assert!(failed.is_err());
    let out = store.export_accepted(&RecordFilter::default(), |_| Ok(())).unwrap();
    assert_eq!(out.iter().map(|p| p.id.clone()).collect::<Vec<_>>(), vec![ps[0].id.clone(), ps[1].id.clone()]);
    assert!(store.export_accepted(&RecordFilter::default(), |_| Ok(())).unwrap().is_empty());
}

#[test]
fn stats_arithmetic() {
    let empty = AcceptanceStats::from_records([]);
    assert_eq!((empty.total.total, empty.total.rate), (0, None));
    assert!(serde_json::to_string(&empty).unwrap().contains("\"rate\":null"));

    let store = ReviewStore::in_memory(clock());
    let ps: Vec<_> = (0..5).map(|n| proposal(Rule::R1, n)).collect();
    store.enqueue(&ps).unwrap();
    for (i, d) in [Decision::Accept, Decision::Accept, Decision::Reject, Decision::Reject].into_iter().enumerate() {
        store.decide(&ps[i].id, d, cite(), "a").unwrap();
    }
    let s = store.stats(&RecordFilter::default());
    let rt = &s.by_type[0];
    assert_eq!((rt.group.as_str(), rt.total, rt.accepted, rt.rejected, rt.pending), ("Row Transfer", 5, 2, 2, 1));
    assert_eq!(rt.rate, Some(0.5));
    let filtered = store.stats(&RecordFilter { status: Some(Status::Pending), ..Default::default() });
    assert_eq!(filtered.total.total, 1);
}

#[test]
fn published_journal_reports_published_rates() {
    let records = published_records();
    let s = AcceptanceStats::from_records(&records);
    assert_eq!((s.total.total, s.total.accepted, s.total.rejected), (603, 466, 137));
    assert_eq!(s.total.rate_percent().as_deref(), Some("77.28%"));
    assert!((s.total.rate.unwrap() * 100.0 - 77.28).abs() <= 0.01);
    for ((t, n, a), row) in TYPE_COUNTS.iter().zip(&s.by_type) {
        assert_eq!((row.group.clone(), row.total, row.accepted), (t.to_string(), *n, *a));
    }
    for ((f, n, a), row) in FLOW_COUNTS.iter().zip(&s.by_direction) {
        assert_eq!((row.group.clone(), row.total, row.accepted), (f.to_string(), *n, *a));
    }
    // Published per-row percentages, which mix rounding and truncation.
    let published = [79.82, 74.28, 63.88, 78.92, 78.25, 74.31];
    for (row, pct) in s.by_type.iter().chain(&s.by_direction).zip(published) {
        assert!((row.rate.unwrap() * 100.0 - pct).abs() <= 0.01, "{} {pct}", row.group);
    }
    assert_eq!(published_proposals().len(), 603);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("published.jsonl");
    write_published_journal(&path).unwrap();
    let store = ReviewStore::open(&path, clock()).unwrap();
    assert_eq!(store.stats(&RecordFilter::default()), s);
}

#[test]
fn filters_by_direction_class_and_rule() {
    let store = ReviewStore::in_memory(clock());
    store.enqueue(&published_proposals()).unwrap();
    let f = |d: &str| RecordFilter { direction: Some(d.into()), ..Default::default() };
    assert_eq!(store.list(&f("en->x"), 0, 1000).total, 204);
    assert_eq!(store.list(&f("x->en"), 0, 10).items.len(), 10);
    let r5 = RecordFilter { rule: Some(Rule::R5), ..Default::default() };
    assert_eq!(store.list(&r5, 0, 1000).total, 72);
    assert!(RecordFilter { direction: Some("sideways".into()), ..Default::default() }.validate().is_err());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn stats_match_raw_records(decisions in proptest::collection::vec(0u8..3, 0..60)) {
            let store = ReviewStore::in_memory(clock());
            let ps: Vec<_> = published_proposals().into_iter().step_by(7).take(decisions.len()).collect();
            store.enqueue(&ps).unwrap();
            for (p, d) in ps.iter().zip(&decisions) {
                match d {
                    0 => {}
                    1 => { store.decide(&p.id, Decision::Accept, cite(), "a").unwrap(); }
                    _ => { store.decide(&p.id, Decision::Reject, None, "a").unwrap(); }
                }
            }
            let records = store.records();
            let s = store.stats(&RecordFilter::default());
            for rows in [&s.by_type, &s.by_direction] {
                prop_assert_eq!(rows.iter().map(|r| r.total).sum::<usize>(), records.len());
                for r in rows.iter().chain([&s.total]) {
                    prop_assert_eq!(r.total, r.accepted + r.rejected + r.pending);
                }
            }
            let acc = records.iter().filter(|r| r.status == Status::Accepted).count();
            let rej = records.iter().filter(|r| r.status == Status::Rejected).count();
            let expect = (acc + rej > 0).then(|| acc as f64 / (acc + rej) as f64);
            prop_assert_eq!(s.total.rate, expect);
        }
    }
}
