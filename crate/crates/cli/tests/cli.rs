use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tabsync_cli::{CliConfig, DictionaryEntry, RunManifest};
use tabsync_core::alignment::{AlignmentPair, AlignmentResult, Module, PairClass, PairId};
use tabsync_core::corpus::{save_corpus, Category, Corpus, GoldAlignment, Infobox, LanguageCode, Split};
use tabsync_core::fixtures::{planted_stage, propose_case, rule_config, table, TABLE_COUNTS};
use tabsync_core::ThresholdSet;
use tempfile::TempDir;

fn tabsync(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tabsync"));
    cmd.args(args).env_remove("SYNC_TRANSLATE_URL").env_remove("SYNC_EMBED_URL").env_remove("SYNC_CACHE_DIR");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write_corpus(dir: &Path, tables: Vec<Infobox>, gold: Vec<GoldAlignment>) -> PathBuf {
    let path = dir.join("corpus");
    save_corpus(&Corpus::new(tables, gold), &path).unwrap();
    path
}

fn write_config(dir: &Path, cfg: &CliConfig) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn en_hi(entity: &str) -> (Infobox, Infobox) {
    let c = Category::Person;
    (
        table(entity, LanguageCode::En, c, &[("born", &["1900"]), ("spouse", &["mary"]), ("pet", &["cat"])]),
        table(entity, LanguageCode::Hi, c, &[("born", &["1900"]), ("spouse", &["mary"])]),
    )
}

#[test]
fn ingest_strict_and_lenient() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("in");
    std::fs::create_dir_all(&input).unwrap();
    let (a, b) = en_hi("E1");
    std::fs::write(input.join("a.json"), serde_json::to_string(&a).unwrap()).unwrap();
    let html = format!(
        "<html lang=\"hi\"><head><title>E1</title><meta name=\"category\" content=\"Person\">\
         <meta name=\"extracted_at\" content=\"2023-01-01\"></head><body><table class=\"infobox\">{}</table></body></html>",
        b.rows.iter().map(|r| format!("<tr><th>{}</th><td>{}</td></tr>", r.key, r.values.join("<br>"))).collect::<String>()
    );
    std::fs::write(input.join("b.html"), html).unwrap();

    let out = tmp.path().join("out");
    ok(&tabsync(&["ingest", "--input", s(&input), "--out", s(&out)], &[]));
    let corpus = tabsync_core::corpus::load_corpus(out.join("corpus")).unwrap();
    assert_eq!(corpus.len(), 2);
    let parsed = corpus.table("E1", LanguageCode::Hi).unwrap();
    assert_eq!(parsed.rows.iter().map(|r| (&r.key, &r.values)).collect::<Vec<_>>(), b.rows.iter().map(|r| (&r.key, &r.values)).collect::<Vec<_>>());

    std::fs::write(input.join("c.json"), "{\"entity_id\": ").unwrap();
    let strict = tabsync(&["ingest", "--input", s(&input), "--out", s(&out)], &[]);
    assert_eq!(strict.status.code(), Some(1));
    let report = read_json(&out.join("ingest-report.json"));
    assert_eq!(report["failures"].as_array().unwrap().len(), 1);

    std::fs::remove_file(input.join("b.html")).unwrap();
    let out2 = tmp.path().join("out2");
    ok(&tabsync(&["ingest", "--input", s(&input), "--out", s(&out2), "--lenient"], &[]));
    let report = read_json(&out2.join("ingest-report.json"));
    assert_eq!(report["tables"], 1);
    assert_eq!(report["failures"].as_array().unwrap().len(), 1);
    assert_eq!(tabsync_core::corpus::load_corpus(out2.join("corpus")).unwrap().len(), 1);
}

fn planted_corpus(tmp: &Path) -> (PathBuf, PathBuf) {
    let f = planted_stage::<f64>();
    let corpus = write_corpus(tmp, vec![f.src.clone(), f.tgt.clone()], vec![]);
    let dictionary = f
        .src
        .rows
        .iter()
        .filter_map(|r| {
            use tabsync_core::providers::{TranslationContext, Translator};
            let ctx = TranslationContext::for_key(&r.values, Category::Person);
            let to = f.translator.translate(&r.key, LanguageCode::De, LanguageCode::En, &ctx).ok()?;
            Some(DictionaryEntry { src: LanguageCode::De, tgt: LanguageCode::En, from: r.key.clone(), to })
        })
        .collect();
    let cfg = CliConfig { thresholds: Some(f.thresholds), dictionary, ..Default::default() };
    (corpus, write_config(tmp, &cfg))
}

#[test]
fn align_writes_one_file_per_entity_and_honours_ablation() {
    let tmp = TempDir::new().unwrap();
    let (corpus, config) = planted_corpus(tmp.path());
    let out = tmp.path().join("out");
    let args = ["align", "--corpus", s(&corpus), "--config", s(&config), "--pair", "de:en", "--entity", "Q937", "--out", s(&out)];
    ok(&tabsync(&args, &[]));
    let files: Vec<_> = std::fs::read_dir(out.join("alignments")).unwrap().collect();
    assert_eq!(files.len(), 1);
    let r: AlignmentResult<f64> = serde_json::from_value(read_json(&out.join("alignments/Q937.de-en.json"))).unwrap();
    assert!(r.pairs.iter().any(|p| p.tgt.len() > 1), "{:?}", r.pairs);

    let out = tmp.path().join("ablated");
    let mut ablated = args.to_vec();
    ablated.extend(["--ablate", "M5"]);
    let at = ablated.iter().position(|a| *a == "--out").unwrap() + 1;
    ablated[at] = s(&out);
    ok(&tabsync(&ablated, &[]));
    let r: AlignmentResult<f64> = serde_json::from_value(read_json(&out.join("alignments/Q937.de-en.json"))).unwrap();
    assert!(r.pairs.iter().all(|p| p.tgt.len() == 1 && p.module != Module::M5));
}

#[test]
fn missing_thresholds_file_falls_back_to_defaults() {
    let tmp = TempDir::new().unwrap();
    let (x, y) = en_hi("E1");
    let corpus = write_corpus(tmp.path(), vec![x, y], vec![]);
    let out = tmp.path().join("out");
    let missing = tmp.path().join("nope.json");
    let run = tabsync(
        &["align", "--corpus", s(&corpus), "--pair", "en:hi", "--entity", "E1", "--thresholds", s(&missing), "--out", s(&out)],
        &[],
    );
    ok(&run);
    assert!(String::from_utf8_lossy(&run.stderr).contains("not found"));
    assert_eq!(CliConfig::default().thresholds(Some(&missing)).unwrap(), ThresholdSet::default());
    let r: AlignmentResult<f64> = serde_json::from_value(read_json(&out.join("alignments/E1.en-hi.json"))).unwrap();
    assert_eq!(r.pairs.len(), 2);
}

fn propose_setup(tmp: &Path) -> (PathBuf, PathBuf) {
    let case = propose_case();
    let corpus = write_corpus(tmp, vec![case.x, case.y], vec![]);
    let cfg = CliConfig {
        update: rule_config(),
        table_counts: TABLE_COUNTS.into_iter().collect(),
        ..Default::default()
    };
    (corpus, write_config(tmp, &cfg))
}

#[test]
fn propose_on_rule_fixture_counts_rules() {
    let tmp = TempDir::new().unwrap();
    let (corpus, config) = propose_setup(tmp.path());
    let out = tmp.path().join("out");
    let stdout = ok(&tabsync(&["propose", "--corpus", s(&corpus), "--config", s(&config), "--pair", "en:ar", "--out", s(&out)], &[]));
    let summary: BTreeMap<String, usize> = serde_json::from_value(read_json(&out.join("rule-summary.json"))).unwrap();
    let expected: BTreeMap<String, usize> =
        (1..=8).map(|i| (format!("R{i}"), match i { 1 => 5, 3 | 5 => 1, _ => 0 })).collect();
    assert_eq!(summary, expected);
    assert!(stdout.contains("R1 5"));
    let lines = std::fs::read_to_string(out.join("proposals.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 7);

    // The proposals feed the review journal.
    let journal = tmp.path().join("journal.jsonl");
    let proposals = out.join("proposals.jsonl");
    let enq = ["enqueue", "--journal", s(&journal), "--proposals", s(&proposals), "--out", s(&out)];
    assert!(ok(&tabsync(&enq, &[])).starts_with("7 new"));
    assert!(ok(&tabsync(&enq, &[])).starts_with("0 new, 7 already"));
    let report = ok(&tabsync(&["report", "--journal", s(&journal), "--out", s(&out)], &[]));
    assert!(report.contains("n/a"), "{report}");
}

#[test]
fn identical_runs_differ_only_in_timings() {
    let tmp = TempDir::new().unwrap();
    let (corpus, config) = propose_setup(tmp.path());
    let out = tmp.path().join("out");
    let args = ["propose", "--corpus", s(&corpus), "--config", s(&config), "--pair", "en:ar", "--out", s(&out)];
    let mut runs = Vec::new();
    for _ in 0..2 {
        ok(&tabsync(&args, &[]));
        let m: RunManifest = serde_json::from_value(read_json(&out.join("manifest-propose.json"))).unwrap();
        let proposals = std::fs::read(out.join("proposals.jsonl")).unwrap();
        runs.push((m, proposals));
    }
    let (mut a, pa) = runs.remove(0);
    let (b, pb) = runs.remove(0);
    assert_eq!(pa, pb);
    assert_eq!(a.timings_ms.keys().collect::<Vec<_>>(), b.timings_ms.keys().collect::<Vec<_>>());
    a.timings_ms = b.timings_ms.clone();
    assert_eq!(a, b);
    assert_eq!(a.config_hash.len(), 64);
    assert_eq!(a.counts["proposals"], 7);
    assert!(a.outputs.contains(&out.join("proposals.jsonl")));
}

#[test]
fn jobs_do_not_change_output() {
    let tmp = TempDir::new().unwrap();
    let mut tables = Vec::new();
    for i in 0..12 {
        let (x, y) = en_hi(&format!("E{i:02}"));
        tables.extend([x, y]);
    }
    let corpus = write_corpus(tmp.path(), tables, vec![]);
    let mut outputs = Vec::new();
    for jobs in ["1", "8"] {
        let out = tmp.path().join(format!("out{jobs}"));
        ok(&tabsync(&["sync", "--corpus", s(&corpus), "--pair", "en:hi", "--jobs", jobs, "--out", s(&out)], &[]));
        let report = std::fs::read_to_string(out.join("sync-report.json")).unwrap();
        let applied = std::fs::read_to_string(out.join("sync-applied.jsonl")).unwrap();
        outputs.push((report, applied));
    }
    assert_eq!(outputs[0], outputs[1]);
    let report: Vec<Value> = serde_json::from_str(&outputs[0].0).unwrap();
    assert_eq!(report.len(), 12);
    assert!(report.iter().all(|r| r["rounds"] == 2));
    let synced = tabsync_core::corpus::load_corpus(tmp.path().join("out1/synced")).unwrap();
    assert_eq!(synced.table("E00", LanguageCode::Hi).unwrap().len(), 3);
}

fn gold_prediction(gold: &GoldAlignment, src: &Infobox, tgt: &Infobox) -> AlignmentResult<f64> {
    let mut by_src: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (a, b) in &gold.pairs {
        by_src.entry(*a).or_default().push(*b);
    }
    let pairs: Vec<AlignmentPair<f64>> =
        by_src.into_iter().map(|(src, tgt)| AlignmentPair { src, tgt, score: 1.0, module: Module::M1 }).collect();
    let aligned_tgt: Vec<usize> = pairs.iter().flat_map(|p| p.tgt.clone()).collect();
    AlignmentResult {
        pair: PairId { entity_id: gold.entity_id.clone(), src_lang: src.language, tgt_lang: tgt.language },
        unaligned_src: (0..src.len()).filter(|i| !pairs.iter().any(|p| p.src == *i)).collect(),
        unaligned_tgt: (0..tgt.len()).filter(|j| !aligned_tgt.contains(j)).collect(),
        pairs,
    }
}

#[test]
fn eval_with_gold_predictions_scores_one() {
    let tmp = TempDir::new().unwrap();
    let mut tables = Vec::new();
    let mut golds = Vec::new();
    for (i, cat) in [Category::Person, Category::City, Category::Person].into_iter().enumerate() {
        let e = format!("E{i}");
        let (mut x, mut y) = en_hi(&e);
        x.category = cat;
        y.category = cat;
        golds.push(GoldAlignment::new(&e, LanguageCode::En, LanguageCode::Hi, vec![(0, 0), (1, 1)]).unwrap().with_split(Split::Test));
        tables.extend([x, y]);
    }
    let corpus = write_corpus(tmp.path(), tables.clone(), golds.clone());
    let predicted = tmp.path().join("predicted");
    std::fs::create_dir_all(&predicted).unwrap();
    for (i, g) in golds.iter().enumerate() {
        let r = gold_prediction(g, &tables[2 * i], &tables[2 * i + 1]);
        std::fs::write(predicted.join(format!("{i}.json")), serde_json::to_string(&r).unwrap()).unwrap();
    }
    for group in ["language", "category", "key-tier"] {
        let out = tmp.path().join(format!("out-{group}"));
        ok(&tabsync(
            &["eval", "--corpus", s(&corpus), "--predicted", s(&predicted), "--group-by", group, "--out", s(&out)],
            &[],
        ));
        let report = read_json(&out.join("eval.json"));
        let rows = report["rows"].as_array().unwrap();
        assert!(!rows.is_empty());
        for row in rows.iter().chain([&report["aggregate"]]) {
            assert_eq!(row["matched"]["f1"], 1.0, "{row}");
            assert_eq!(row["unmatched"]["f1"], 1.0, "{row}");
        }
        assert!(std::fs::read_to_string(out.join("eval.csv")).unwrap().lines().count() > 1);
    }
    let out = tmp.path().join("out-category");
    let rows = read_json(&out.join("eval.json"))["rows"].as_array().unwrap().len();
    assert_eq!(rows, 2);
}

#[test]
fn tune_writes_usable_thresholds() {
    let tmp = TempDir::new().unwrap();
    let c = Category::Person;
    let mut tables = Vec::new();
    let mut golds = Vec::new();
    for i in 0..4 {
        let e = format!("T{i}");
        tables.push(table(&e, LanguageCode::En, c, &[("born", &["1900"]), ("spouse", &["mary"])]));
        tables.push(table(&e, LanguageCode::Fr, c, &[("born", &["1900"]), ("spouse", &["mary"])]));
        golds.push(GoldAlignment::new(&e, LanguageCode::En, LanguageCode::Fr, vec![(0, 0), (1, 1)]).unwrap().with_split(Split::Validation));
    }
    let corpus = write_corpus(tmp.path(), tables, golds);
    let out = tmp.path().join("out");
    ok(&tabsync(&["tune", "--corpus", s(&corpus), "--out", s(&out)], &[]));
    let tuned: ThresholdSet = serde_json::from_value(read_json(&out.join("thresholds.json"))).unwrap();
    tuned.validate().unwrap();
    // Identical tables align perfectly at any threshold up to their score, so
    // the larger grid points win the ties.
    assert!(tuned.class(PairClass::EnglishInvolved).iter().all(|t| *t >= 0.9), "{tuned:?}");
    assert_eq!(tuned.class(PairClass::NonEnglish), ThresholdSet::default().class(PairClass::NonEnglish));
    let trace = read_json(&out.join("tune-trace.json"));
    assert_eq!(trace[0]["pairs_used"], 4);

    // The tuned file feeds back into alignment.
    let out2 = tmp.path().join("out2");
    let th = out.join("thresholds.json");
    ok(&tabsync(&["align", "--corpus", s(&corpus), "--pair", "en:fr", "--thresholds", s(&th), "--out", s(&out2)], &[]));
    assert_eq!(std::fs::read_dir(out2.join("alignments")).unwrap().count(), 4);
}

#[test]
fn stats_reports_tiers_from_configured_counts() {
    let tmp = TempDir::new().unwrap();
    let (x, y) = en_hi("E1");
    let corpus = write_corpus(tmp.path(), vec![x, y], vec![]);
    let config = write_config(tmp.path(), &CliConfig { table_counts: TABLE_COUNTS.into_iter().collect(), ..Default::default() });
    let out = tmp.path().join("out");
    ok(&tabsync(&["stats", "--corpus", s(&corpus), "--config", s(&config), "--out", s(&out)], &[]));
    let stats = read_json(&out.join("stats.json"));
    assert_eq!(stats["languages"]["af"]["tier"], "Low");
    assert_eq!(stats["languages"]["af"]["tables"], 1575);
    assert_eq!(stats["languages"]["en"]["tier"], "High");
    assert_eq!(stats["languages"]["hi"]["tier"], "Low");
    assert_eq!(stats["languages"]["de"]["tier"], "Medium");
}

#[test]
fn report_prints_published_rate_from_journal_and_service() {
    let tmp = TempDir::new().unwrap();
    let journal = tmp.path().join("journal.jsonl");
    tabsync_service::fixtures::write_published_journal(&journal).unwrap();
    let out = tmp.path().join("out");
    let stdout = ok(&tabsync(&["report", "--journal", s(&journal), "--out", s(&out)], &[]));
    assert!(stdout.contains("Acceptance rate: 77.28% (466/603)"), "{stdout}");

    let addr = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap()
    };
    let store = std::sync::Arc::new(
        tabsync_service::ReviewStore::open(&journal, std::sync::Arc::new(tabsync_service::SystemClock)).unwrap(),
    );
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(tabsync_service::http::serve(store, addr, None)).unwrap();
    });
    let url = format!("http://{addr}");
    let mut last = None;
    for _ in 0..100 {
        let run = tabsync(&["report", "--service", &url, "--out", s(&out)], &[]);
        if run.status.success() {
            last = Some(run);
            break;
        }
        std::thread::sleep(std::time::Duration::from_millis(50));
    }
    let stdout = ok(&last.expect("service came up"));
    assert!(stdout.contains("Acceptance rate: 77.28% (466/603)"), "{stdout}");
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(tabsync(&["--help"], &[]).status.code(), Some(0));
    assert_eq!(tabsync(&["align", "--pair", "en-hi"], &[]).status.code(), Some(1));
    assert_eq!(tabsync(&["align", "--pair", "en:en"], &[]).status.code(), Some(1));
    assert_eq!(tabsync(&["stats", "--out", s(&out)], &[]).status.code(), Some(1));
    let m: RunManifest = serde_json::from_value(read_json(&out.join("manifest-stats.json"))).unwrap();
    assert_eq!(m.exit_code, 1);
    assert!(m.error.unwrap().contains("--corpus"));

    let (x, y) = en_hi("E1");
    let corpus = write_corpus(tmp.path(), vec![x, y], vec![]);
    let base = ["align", "--corpus", s(&corpus), "--pair", "en:hi", "--out", s(&out)];
    let unreachable = [("SYNC_TRANSLATE_URL", "http://127.0.0.1:9/translate")];
    assert_eq!(tabsync(&base, &unreachable).status.code(), Some(2));
    let mut bad = base.to_vec();
    bad.extend(["--ablate", "M9"]);
    assert_eq!(tabsync(&bad, &[]).status.code(), Some(1));
    let mut unknown = base.to_vec();
    unknown.extend(["--entity", "nope"]);
    assert_eq!(tabsync(&unknown, &[]).status.code(), Some(1));
}

#[test]
fn cache_dir_makes_runs_replayable_offline() {
    let tmp = TempDir::new().unwrap();
    let (x, y) = en_hi("E1");
    let corpus = write_corpus(tmp.path(), vec![x, y], vec![]);
    let cache = tmp.path().join("cache");
    std::fs::create_dir_all(&cache).unwrap();
    let out = tmp.path().join("out");
    let args = ["align", "--corpus", s(&corpus), "--pair", "en:hi", "--out", s(&out)];
    ok(&tabsync(&args, &[("SYNC_CACHE_DIR", s(&cache))]));
    assert!(cache.join("provider-cache.jsonl").exists());
    let first = std::fs::read(out.join("alignments/E1.en-hi.json")).unwrap();
    ok(&tabsync(&args, &[("SYNC_CACHE_DIR", s(&cache))]));
    assert_eq!(first, std::fs::read(out.join("alignments/E1.en-hi.json")).unwrap());
}
