use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};
use tabsync_core::alignment::{align_many, Aligner, AlignmentResult, ModuleSet, PairClass, PairId};
use tabsync_core::corpus::{
    load_corpus, load_corpus_lenient, parse_infobox_html, parse_infobox_line, rare_keys, resource_tier,
    row_difference, save_corpus, transfer_stats, Corpus, CorpusStats, GoldAlignment, HtmlMeta, Infobox, RecordError,
    Split,
};
use tabsync_core::eval::{evaluate_pair, group_report, tune_thresholds, GroupBy, KeyTier, ValidationPair};
use tabsync_core::providers::{build_vote_map, KeyTranslationMap};
use tabsync_core::update::{rule_summary, synchronize_fixpoint, EditProposal, Rule, RuleEngine, UpdateConfig};
use tabsync_core::{ThresholdSet, TuneOutcome};
use tabsync_service::{AcceptanceStats, ReviewStore, SystemClock};

use crate::config::{CACHE_DIR, EMBED_URL, TRANSLATE_URL};
use crate::{CliConfig, CliError, Cli, Command, GlobalArgs, LangPair, Providers, RunManifest};

pub(crate) fn dispatch(cli: &Cli, m: &mut RunManifest) -> Result<(), CliError> {
    let g = &cli.global;
    if g.jobs == 0 {
        return Err(CliError::invalid("--jobs must be at least 1"));
    }
    for p in [&g.config, &g.thresholds, &g.corpus].into_iter().flatten() {
        m.input(p);
    }
    let cfg = CliConfig::load(g.config.as_deref())?;
    m.config_hash = config_hash(&cfg, g)?;
    match &cli.command {
        Command::Ingest { input } => ingest(g, input, m),
        Command::Stats => stats(g, &cfg, m),
        Command::Align => align(g, &cfg, m),
        Command::Tune => tune(g, &cfg, m),
        Command::Eval { predicted, group_by } => eval(g, &cfg, predicted.as_deref(), group_by, m),
        Command::Propose => propose(g, &cfg, m),
        Command::Sync => sync(g, &cfg, m),
        Command::Enqueue { journal, proposals } => enqueue(&cfg, journal, proposals, m),
        Command::Serve { journal, addr, ui } => serve(&cfg, journal, *addr, ui.clone(), m),
        Command::Report { journal, service } => report(g, journal.as_deref(), service.as_deref(), m),
    }
}

/// Hash of everything besides the inputs that shapes a run's output.
fn config_hash(cfg: &CliConfig, g: &GlobalArgs) -> Result<String, CliError> {
    let thresholds = match &g.thresholds {
        Some(p) if p.exists() => Some(fs::read(p).map_err(|e| CliError::invalid(format!("{}: {e}", p.display())))?),
        _ => None,
    };
    let env: Vec<(&str, String)> = [TRANSLATE_URL, EMBED_URL, CACHE_DIR]
        .into_iter()
        .map(|k| (k, std::env::var(k).unwrap_or_default()))
        .collect();
    let mut extra = env;
    extra.push(("ablate", g.ablate.clone().unwrap_or_default()));
    extra.push(("thresholds", thresholds.map(|b| hex::encode(Sha256::digest(b))).unwrap_or_default()));
    Ok(cfg.hash(None, &extra))
}

fn write_json(path: &Path, value: &impl Serialize, m: &mut RunManifest) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(value).map_err(CliError::internal)?;
    write_text(path, &(body + "\n"), m)
}

fn write_text(path: &Path, body: &str, m: &mut RunManifest) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, body).map_err(|e| CliError::io(path, e))?;
    m.output(path);
    Ok(())
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

fn load(g: &GlobalArgs, m: &mut RunManifest) -> Result<Corpus, CliError> {
    let path = g.corpus.as_ref().ok_or_else(|| CliError::invalid("--corpus is required"))?;
    let corpus = m.timed("load", || -> Result<Corpus, CliError> {
        if g.lenient {
            let (corpus, errors) = load_corpus_lenient(path)?;
            for e in &errors {
                tracing::warn!("skipped record {e}");
            }
            Ok(corpus)
        } else {
            Ok(load_corpus(path)?)
        }
    })?;
    m.count("tables", corpus.len());
    Ok(corpus)
}

fn pair_arg(g: &GlobalArgs) -> Result<LangPair, CliError> {
    g.pair.ok_or_else(|| CliError::invalid("--pair SRC:TGT is required"))
}

/// Table pairs for the requested languages, sorted by entity.
fn table_pairs<'c>(corpus: &'c Corpus, g: &GlobalArgs) -> Result<Vec<(&'c Infobox, &'c Infobox)>, CliError> {
    let pair = pair_arg(g)?;
    let mut entities = corpus.shared_entities(pair.src, pair.tgt);
    if let Some(e) = &g.entity {
        if !entities.contains(e) {
            return Err(CliError::invalid(format!("entity `{e}` has no {pair} table pair in the corpus")));
        }
        entities = vec![e.clone()];
    }
    Ok(entities
        .iter()
        .filter_map(|e| Some((corpus.table(e, pair.src)?, corpus.table(e, pair.tgt)?)))
        .collect())
}

fn modules(g: &GlobalArgs) -> Result<ModuleSet, CliError> {
    match &g.ablate {
        Some(list) => ModuleSet::ablate(list).map_err(CliError::invalid),
        None => Ok(ModuleSet::all()),
    }
}

/// Providers, vote map and thresholds shared by the alignment commands.
struct Pipeline {
    providers: Providers,
    vote_map: KeyTranslationMap,
    thresholds: ThresholdSet,
    modules: ModuleSet,
}

impl Pipeline {
    fn new(g: &GlobalArgs, cfg: &CliConfig, corpus: &Corpus, m: &mut RunManifest) -> Result<Self, CliError> {
        let providers = Providers::from_env(cfg)?;
        tracing::debug!(providers = %providers.description);
        let vote_map = m.timed("vote_map", || build_vote_map(corpus, &*providers.translator, &cfg.vote))?;
        m.count("vote_entries", vote_map.len());
        if let Some(p) = &providers.cache_path {
            m.input(p);
        }
        Ok(Pipeline { thresholds: cfg.thresholds(g.thresholds.as_deref())?, modules: modules(g)?, providers, vote_map })
    }

    fn aligner(&self) -> Aligner<'_, f64> {
        Aligner::new(&*self.providers.translator, &*self.providers.embedder)
            .with_vote_map(&self.vote_map)
            .with_thresholds(self.thresholds)
            .with_modules(self.modules.clone())
    }
}

/// Maps `f` over `items` on `jobs` threads, keeping input order.
fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let done: Vec<Vec<(usize, R)>> = std::thread::scope(|s| {
        let workers: Vec<_> = (0..jobs.clamp(1, items.len().max(1)))
            .map(|_| {
                s.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= items.len() {
                            break out;
                        }
                        out.push((i, f(&items[i])));
                    }
                })
            })
            .collect();
        workers.into_iter().map(|w| w.join().expect("worker panicked")).collect()
    });
    for (i, r) in done.into_iter().flatten() {
        slots[i] = Some(r);
    }
    slots.into_iter().map(|r| r.expect("every slot filled")).collect()
}

fn file_stem(id: &PairId) -> String {
    let entity: String =
        id.entity_id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    format!("{entity}.{}-{}", id.src_lang, id.tgt_lang)
}

/// Corpus stats with tier counts taken from the config when supplied.
fn tier_stats(corpus: &Corpus, cfg: &CliConfig) -> CorpusStats {
    let mut stats = CorpusStats::compute(corpus);
    if !cfg.table_counts.is_empty() {
        stats.table_count = cfg.table_counts.clone();
    }
    stats
}

#[derive(Serialize)]
struct IngestReport {
    tables: usize,
    files: usize,
    skipped: Vec<PathBuf>,
    failures: Vec<RecordError>,
}

fn ingest(g: &GlobalArgs, input: &Path, m: &mut RunManifest) -> Result<(), CliError> {
    m.input(input);
    if !input.is_dir() {
        return Err(CliError::invalid(format!("{} is not a directory", input.display())));
    }
    let mut files = Vec::new();
    collect_files(input, &mut files)?;
    files.sort();

    let mut tables = Vec::new();
    let mut report = IngestReport { tables: 0, files: files.len(), skipped: Vec::new(), failures: Vec::new() };
    let fail = |file: &Path, line: usize, message: String| RecordError { file: file.display().to_string(), line, message };
    m.timed("parse", || {
        for file in &files {
            let ext = file.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
            let text = match fs::read_to_string(file) {
                Ok(t) => t,
                Err(e) => {
                    report.failures.push(fail(file, 0, e.to_string()));
                    continue;
                }
            };
            match ext.as_str() {
                "html" | "htm" => match parse_infobox_html(&text, &HtmlMeta::default()) {
                    Ok(t) => tables.push(t),
                    Err(e) => report.failures.push(fail(file, 0, e.to_string())),
                },
                "json" => match parse_infobox_line(&text) {
                    Ok(t) => tables.push(t),
                    Err(e) => report.failures.push(fail(file, 0, e)),
                },
                "jsonl" => {
                    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                        match parse_infobox_line(line) {
                            Ok(t) => tables.push(t),
                            Err(e) => report.failures.push(fail(file, i + 1, e)),
                        }
                    }
                }
                _ => report.skipped.push(file.clone()),
            }
        }
    });

    let mut seen = BTreeSet::new();
    tables.retain(|t: &Infobox| {
        let fresh = seen.insert((t.entity_id.clone(), t.language));
        if !fresh {
            report.failures.push(RecordError {
                file: String::new(),
                line: 0,
                message: format!("duplicate table {} ({})", t.entity_id, t.language),
            });
        }
        fresh
    });
    report.tables = tables.len();
    m.count("tables", report.tables);
    m.count("failures", report.failures.len());
    for f in &report.failures {
        eprintln!("failed: {f}");
    }
    write_json(&g.out.join("ingest-report.json"), &report, m)?;
    if !report.failures.is_empty() && !g.lenient {
        return Err(CliError::invalid(format!("{} input(s) failed to parse; rerun with --lenient to skip them", report.failures.len())));
    }
    let dir = g.out.join("corpus");
    let written = save_corpus(&Corpus::new(tables, Vec::new()), &dir).map_err(CliError::internal)?;
    written.iter().for_each(|p| m.output(p));
    println!("ingested {} table(s), {} failure(s)", report.tables, report.failures.len());
    Ok(())
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    for entry in fs::read_dir(dir).map_err(|e| CliError::invalid(format!("{}: {e}", dir.display())))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct LanguageSummary {
    tables: usize,
    tier: Option<tabsync_core::corpus::Tier>,
    avg_rows: Option<f64>,
    outbound_pct: Option<f64>,
    inbound_pct: Option<f64>,
    row_difference: Option<f64>,
}

fn stats(g: &GlobalArgs, cfg: &CliConfig, m: &mut RunManifest) -> Result<(), CliError> {
    let corpus = load(g, m)?;
    let stats = m.timed("stats", || tier_stats(&corpus, cfg));
    let transfer = transfer_stats(&corpus);
    let mut languages: BTreeSet<_> = corpus.languages().into_iter().collect();
    languages.extend(stats.table_count.keys().copied());
    let mut summary = BTreeMap::new();
    println!("{:<5} {:>7} {:<7} {:>8} {:>9} {:>9} {:>8}", "lang", "tables", "tier", "avg_rows", "out%", "in%", "row_diff");
    for lang in languages {
        let t = transfer.get(&lang);
        let s = LanguageSummary {
            tables: stats.table_count.get(&lang).copied().unwrap_or(0),
            tier: resource_tier(lang, &stats).ok(),
            avg_rows: stats.avg_rows.get(&lang).copied(),
            outbound_pct: t.map(|t| t.outbound_pct),
            inbound_pct: t.map(|t| t.inbound_pct),
            row_difference: row_difference(&corpus, lang),
        };
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<5} {:>7} {:<7} {:>8} {:>9} {:>9} {:>8}",
            lang.as_str(),
            s.tables,
            s.tier.map(|t| format!("{t:?}")).unwrap_or_else(|| "-".into()),
            opt(s.avg_rows),
            opt(s.outbound_pct),
            opt(s.inbound_pct),
            opt(s.row_difference)
        );
        summary.insert(lang, s);
    }
    m.count("languages", summary.len());
    m.count("keys", stats.total_keys);
    let body = serde_json::json!({ "languages": summary, "corpus": stats });
    write_json(&g.out.join("stats.json"), &body, m)
}

fn align(g: &GlobalArgs, cfg: &CliConfig, m: &mut RunManifest) -> Result<(), CliError> {
    let corpus = load(g, m)?;
    let pairs = table_pairs(&corpus, g)?;
    let pipeline = Pipeline::new(g, cfg, &corpus, m)?;
    let aligner = pipeline.aligner();
    let results = m.timed("align", || align_many(&aligner, &pairs, g.jobs));
    let dir = g.out.join("alignments");
    for r in results {
        let r = r?;
        m.count("pairs", 1);
        m.count("aligned_rows", r.pairs.len());
        for p in &r.pairs {
            m.count(&format!("module_{}", p.module), 1);
        }
        println!("{} {} row pair(s), coverage {:.2}", r.pair, r.pairs.len(), r.coverage());
        write_json(&dir.join(format!("{}.json", file_stem(&r.pair))), &r, m)?;
    }
    Ok(())
}

fn tune(g: &GlobalArgs, cfg: &CliConfig, m: &mut RunManifest) -> Result<(), CliError> {
    let corpus = load(g, m)?;
    let pipeline = Pipeline::new(g, cfg, &corpus, m)?;
    let aligner = pipeline.aligner();
    let wanted = |gold: &GoldAlignment| match g.pair {
        Some(p) => BTreeSet::from([p.src, p.tgt]) == BTreeSet::from([gold.lang_a, gold.lang_b]),
        None => true,
    };
    let pairs: Vec<ValidationPair<'_>> = corpus
        .gold()
        .iter()
        .filter(|gold| gold.split == Split::Validation && wanted(gold))
        .filter(|gold| g.entity.as_ref().is_none_or(|e| *e == gold.entity_id))
        .filter_map(|gold| {
            Some(ValidationPair {
                src: corpus.table(&gold.entity_id, gold.lang_a)?,
                tgt: corpus.table(&gold.entity_id, gold.lang_b)?,
                gold,
            })
        })
        .collect();
    let classes: BTreeSet<PairClass> = pairs.iter().map(|p| PairClass::of(p.src.language, p.tgt.language)).collect();
    if classes.is_empty() {
        return Err(CliError::invalid("no validation gold for the requested pairs"));
    }
    let mut tuned = pipeline.thresholds;
    let mut outcomes: Vec<TuneOutcome> = Vec::new();
    for class in classes {
        let outcome = m.timed(&format!("tune_{class:?}"), || tune_thresholds(&aligner, &pairs, &cfg.grid, class))?;
        *tuned.class_mut(class) = *outcome.thresholds.class(class);
        m.count("validation_pairs", outcome.pairs_used);
        println!("{class:?}: {:?} from {} pair(s)", outcome.thresholds.class(class), outcome.pairs_used);
        outcomes.push(outcome);
    }
    write_json(&g.out.join("thresholds.json"), &tuned, m)?;
    write_json(&g.out.join("tune-trace.json"), &outcomes, m)
}

fn read_alignments(path: &Path, m: &mut RunManifest) -> Result<Vec<AlignmentResult<f64>>, CliError> {
    m.input(path);
    let mut files = Vec::new();
    if path.is_dir() {
        collect_files(path, &mut files)?;
        files.retain(|f| f.extension().is_some_and(|e| e == "json" || e == "jsonl"));
        files.sort();
    } else {
        files.push(path.to_path_buf());
    }
    let mut out = Vec::new();
    for f in files {
        let text = read_text(&f)?;
        let parse = |s: &str, line: usize| {
            serde_json::from_str::<AlignmentResult<f64>>(s)
                .map_err(|e| CliError::invalid(format!("{}:{line}: {e}", f.display())))
        };
        if f.extension().is_some_and(|e| e == "jsonl") {
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                out.push(parse(line, i + 1)?);
            }
        } else {
            out.push(parse(&text, 0)?);
        }
    }
    Ok(out)
}

fn eval(
    g: &GlobalArgs,
    cfg: &CliConfig,
    predicted: Option<&Path>,
    group_by: &str,
    m: &mut RunManifest,
) -> Result<(), CliError> {
    let group_by: GroupBy = group_by.parse().map_err(CliError::invalid)?;
    let corpus = load(g, m)?;
    let stats = CorpusStats::compute(&corpus);
    let wanted = |gold: &GoldAlignment| {
        g.pair.is_none_or(|p| BTreeSet::from([p.src, p.tgt]) == BTreeSet::from([gold.lang_a, gold.lang_b]))
            && g.entity.as_ref().is_none_or(|e| *e == gold.entity_id)
    };
    let golds: Vec<&GoldAlignment> = corpus.gold().iter().filter(|gold| wanted(gold)).collect();
    if golds.is_empty() {
        return Err(CliError::invalid("no gold alignments for the requested pairs"));
    }
    let mut tables = Vec::new();
    for gold in &golds {
        let src = corpus.table(&gold.entity_id, gold.lang_a);
        let tgt = corpus.table(&gold.entity_id, gold.lang_b);
        match (src, tgt) {
            (Some(s), Some(t)) => tables.push((*gold, s, t)),
            _ => return Err(CliError::invalid(format!("gold {} has no table pair in the corpus", gold.entity_id))),
        }
    }

    let predictions: Vec<AlignmentResult<f64>> = match predicted {
        Some(path) => {
            let mut by_pair: BTreeMap<(String, BTreeSet<_>), AlignmentResult<f64>> = BTreeMap::new();
            for r in read_alignments(path, m)? {
                by_pair.insert((r.pair.entity_id.clone(), BTreeSet::from([r.pair.src_lang, r.pair.tgt_lang])), r);
            }
            let mut out = Vec::new();
            for (gold, _, _) in &tables {
                let key = (gold.entity_id.clone(), BTreeSet::from([gold.lang_a, gold.lang_b]));
                match by_pair.remove(&key) {
                    Some(r) => out.push(r),
                    None => {
                        return Err(CliError::invalid(format!(
                            "no prediction for {} {}:{}",
                            gold.entity_id, gold.lang_a, gold.lang_b
                        )))
                    }
                }
            }
            out
        }
        None => {
            let pipeline = Pipeline::new(g, cfg, &corpus, m)?;
            let aligner = pipeline.aligner();
            let pairs: Vec<_> = tables.iter().map(|(_, s, t)| (*s, *t)).collect();
            m.timed("align", || align_many(&aligner, &pairs, g.jobs)).into_iter().collect::<Result<_, _>>()?
        }
    };

    let tiers = |t: &Infobox| -> Vec<KeyTier> { t.rows.iter().map(|r| KeyTier::from_frequency(stats.key_total(&r.key))).collect() };
    let mut evaluations = Vec::new();
    for ((gold, src, tgt), pred) in tables.iter().zip(&predictions) {
        let (a, b) = if pred.pair.src_lang == src.language { (src, tgt) } else { (tgt, src) };
        let (ta, tb) = (tiers(a), tiers(b));
        evaluations.push(evaluate_pair(gold, pred, a.category, Some((&ta, &tb)))?);
    }
    m.count("pairs", evaluations.len());
    let report = group_report(&evaluations, group_by);
    let csv = report.to_csv().map_err(CliError::internal)?;
    print!("{csv}");
    write_text(&g.out.join("eval.csv"), &csv, m)?;
    write_json(&g.out.join("eval.json"), &report, m)
}

/// Update config with rare keys filled from English tables when the config
/// names none.
fn update_config(corpus: &Corpus, cfg: &CliConfig) -> UpdateConfig {
    let mut update = cfg.update.clone();
    if update.rare_keys.is_empty() {
        let english: Vec<Infobox> = corpus.tables().iter().filter(|t| t.language.is_english()).cloned().collect();
        update.rare_keys = rare_keys(&CorpusStats::compute(&Corpus::new(english, Vec::new())), update.rare_key_cutoff);
    }
    update
}

fn propose(g: &GlobalArgs, cfg: &CliConfig, m: &mut RunManifest) -> Result<(), CliError> {
    let corpus = load(g, m)?;
    let pairs = table_pairs(&corpus, g)?;
    let pipeline = Pipeline::new(g, cfg, &corpus, m)?;
    let aligner = pipeline.aligner();
    let stats = tier_stats(&corpus, cfg);
    let update = update_config(&corpus, cfg);
    let engine = RuleEngine::<f64>::new(&update, &stats, &*pipeline.providers.translator)
        .with_embedder(&*pipeline.providers.embedder);

    let alignments = m.timed("align", || align_many(&aligner, &pairs, g.jobs));
    let mut proposals: Vec<EditProposal> = Vec::new();
    let mut failures = Vec::new();
    m.timed("rules", || -> Result<(), CliError> {
        for ((x, y), al) in pairs.iter().zip(alignments) {
            let out = engine.apply(x, y, &al?);
            proposals.extend(out.proposals);
            failures.extend(out.failures);
        }
        Ok(())
    })?;
    let summary = rule_summary(&proposals);
    let named: BTreeMap<String, usize> = Rule::ALL.iter().map(|r| (r.to_string(), summary.get(r).copied().unwrap_or(0))).collect();
    for (rule, n) in &named {
        println!("{rule} {n}");
    }
    m.count("pairs", pairs.len());
    m.count("proposals", proposals.len());
    m.count("rule_failures", failures.len());
    let body: String = proposals.iter().map(|p| serde_json::to_string(p).expect("proposal serializes") + "\n").collect();
    write_text(&g.out.join("proposals.jsonl"), &body, m)?;
    write_json(&g.out.join("rule-summary.json"), &named, m)?;
    if !failures.is_empty() {
        let failures: Vec<String> = failures.iter().map(|f| format!("{} {}: {}", f.rule, f.direction, f.error)).collect();
        write_json(&g.out.join("rule-failures.json"), &failures, m)?;
        if !g.lenient {
            return Err(CliError::provider(format!("{} rule evaluation(s) failed: {}", failures.len(), failures[0])));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SyncEntry {
    pair: PairId,
    rounds: usize,
    proposals_per_round: Vec<usize>,
    applied: usize,
}

fn sync(g: &GlobalArgs, cfg: &CliConfig, m: &mut RunManifest) -> Result<(), CliError> {
    let corpus = load(g, m)?;
    let pairs = table_pairs(&corpus, g)?;
    let pipeline = Pipeline::new(g, cfg, &corpus, m)?;
    let aligner = pipeline.aligner();
    let stats = tier_stats(&corpus, cfg);
    let update = update_config(&corpus, cfg);
    let engine = RuleEngine::<f64>::new(&update, &stats, &*pipeline.providers.translator)
        .with_embedder(&*pipeline.providers.embedder);

    let outcomes = m.timed("sync", || par_map(&pairs, g.jobs, |(x, y)| synchronize_fixpoint(x, y, &aligner, &engine)));
    let mut synced: BTreeMap<(String, _), Infobox> = BTreeMap::new();
    let mut report = Vec::new();
    let mut applied = String::new();
    for ((x, y), outcome) in pairs.iter().zip(outcomes) {
        let o = outcome?;
        let pair = PairId { entity_id: x.entity_id.clone(), src_lang: x.language, tgt_lang: y.language };
        println!("{pair} {} round(s), {} edit(s)", o.rounds, o.applied.len());
        for p in &o.applied {
            applied.push_str(&serde_json::to_string(p).expect("proposal serializes"));
            applied.push('\n');
        }
        m.count("pairs", 1);
        m.count("applied", o.applied.len());
        report.push(SyncEntry { pair, rounds: o.rounds, proposals_per_round: o.proposals_per_round, applied: o.applied.len() });
        synced.insert((o.x.entity_id.clone(), o.x.language), o.x);
        synced.insert((o.y.entity_id.clone(), o.y.language), o.y);
    }
    let (tables, gold) = corpus.into_parts();
    let tables: Vec<Infobox> = tables
        .into_iter()
        .map(|t| synced.remove(&(t.entity_id.clone(), t.language)).unwrap_or(t))
        .collect();
    let written = save_corpus(&Corpus::new(tables, gold), g.out.join("synced")).map_err(CliError::internal)?;
    written.iter().for_each(|p| m.output(p));
    write_text(&g.out.join("sync-applied.jsonl"), &applied, m)?;
    write_json(&g.out.join("sync-report.json"), &report, m)
}

fn open_store(cfg: &CliConfig, journal: &Path) -> Result<ReviewStore, CliError> {
    let store = ReviewStore::open(journal, Arc::new(SystemClock))?;
    Ok(match &cfg.url_template {
        Some(t) => store.with_url_template(t.clone()),
        None => store,
    })
}

fn enqueue(cfg: &CliConfig, journal: &Path, proposals: &Path, m: &mut RunManifest) -> Result<(), CliError> {
    m.input(proposals);
    let text = read_text(proposals)?;
    let mut batch = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let p: EditProposal = serde_json::from_str(line)
            .map_err(|e| CliError::invalid(format!("{}:{}: {e}", proposals.display(), i + 1)))?;
        batch.push(p);
    }
    let store = open_store(cfg, journal)?;
    let before = store.records().len();
    let ids = m.timed("enqueue", || store.enqueue(&batch))?;
    let added = store.records().len() - before;
    m.count("proposals", ids.len());
    m.count("added", added);
    m.output(journal);
    println!("{added} new, {} already queued", ids.len() - added);
    Ok(())
}

fn serve(
    cfg: &CliConfig,
    journal: &Path,
    addr: std::net::SocketAddr,
    ui: Option<PathBuf>,
    m: &mut RunManifest,
) -> Result<(), CliError> {
    m.input(journal);
    let store = Arc::new(open_store(cfg, journal)?);
    m.count("records", store.records().len());
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(CliError::internal)?;
    eprintln!("serving {} records on http://{addr}", store.records().len());
    runtime.block_on(tabsync_service::http::serve(store, addr, ui)).map_err(CliError::internal)
}

fn report(g: &GlobalArgs, journal: Option<&Path>, service: Option<&str>, m: &mut RunManifest) -> Result<(), CliError> {
    let stats: AcceptanceStats = match (journal, service) {
        (Some(path), None) => {
            m.input(path);
            if !path.exists() {
                return Err(CliError::invalid(format!("journal {} not found", path.display())));
            }
            ReviewStore::open(path, Arc::new(SystemClock))?.stats(&Default::default())
        }
        (None, Some(url)) => {
            let url = format!("{}/stats", url.trim_end_matches('/'));
            let resp = reqwest::blocking::get(&url).map_err(|e| CliError::provider(format!("{url}: {e}")))?;
            if !resp.status().is_success() {
                return Err(CliError::provider(format!("{url}: HTTP {}", resp.status())));
            }
            resp.json().map_err(|e| CliError::provider(format!("{url}: {e}")))?
        }
        _ => return Err(CliError::invalid("report needs exactly one of --journal or --service")),
    };
    print!("{}", stats.render());
    match stats.total.rate_percent() {
        Some(rate) => println!("Acceptance rate: {rate} ({}/{})", stats.total.accepted, stats.total.accepted + stats.total.rejected),
        None => println!("Acceptance rate: n/a (nothing decided)"),
    }
    m.count("records", stats.total.total);
    m.count("accepted", stats.total.accepted);
    m.count("rejected", stats.total.rejected);
    write_json(&g.out.join("report.json"), &stats, m)
}
