//! Small hand-built datasets shared by tests, the acceptance suite and the
//! CLI demo commands. All of them run with the offline stub providers.

use std::collections::BTreeMap;

use chrono::NaiveDate;

use crate::alignment::{Module, PairClass, ThresholdSet};
use crate::corpus::{Category, Infobox, LanguageCode, Row};
use crate::providers::{DictionaryTranslator, KeyTranslationMap};
use crate::scalar::Scalar;

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid fixture date")
}

/// Builds a table from `(key, values)` literals.
pub fn table(entity: &str, language: LanguageCode, category: Category, rows: &[(&str, &[&str])]) -> Infobox {
    let rows = rows.iter().map(|(k, v)| Row::new(*k, v.iter().copied()).expect("fixture row")).collect();
    Infobox::new(entity, language, category, date(2023, 1, 1), rows).expect("fixture table")
}

/// A de/en pair where each source row is alignable by exactly one stage.
///
/// | src | stage | target |
/// |-----|-------|--------|
/// | 0   | M1    | 0      |
/// | 1   | M2    | 1      |
/// | 2   | M3    | 2      |
/// | 3   | M4    | 3      |
/// | 4   | M5    | 4, 5   |
/// | 5   | none  |        |
///
/// Similarities follow from token overlap under `HashedBowEmbedder`.
pub struct PlantedStage<T: Scalar> {
    pub src: Infobox,
    pub tgt: Infobox,
    pub translator: DictionaryTranslator,
    pub vote_map: KeyTranslationMap,
    pub thresholds: ThresholdSet<T>,
    /// Expected `(src, targets, module)` triples.
    pub expected: Vec<(usize, Vec<usize>, Module)>,
}

pub fn planted_stage<T: Scalar>() -> PlantedStage<T> {
    use LanguageCode::{De, En};
    let src = table(
        "Q937",
        De,
        Category::Person,
        &[
            ("Geboren", &["1900"]),
            ("Ehepartner", &["maria"]),
            ("Bekannt für", &["special general relativity theory gravitation"]),
            ("Beruf", &["physicist teacher"]),
            ("Eltern", &["alice", "bob"]),
            ("Haustier", &["cat"]),
        ],
    );
    let tgt = table(
        "Q937",
        En,
        Category::Person,
        &[
            ("born", &["1900"]),
            ("spouse", &["mary"]),
            ("major achievements", &["special general relativity theory gravitation"]),
            ("profession", &["physicist teacher"]),
            ("parent father figure", &["alice"]),
            ("parent mother figure", &["bob"]),
        ],
    );
    let translator = DictionaryTranslator::new()
        .passthrough()
        .with(De, En, "Geboren", "given birth")
        .with(De, En, "Ehepartner", "spouse name")
        .with(De, En, "Bekannt für", "known for")
        .with(De, En, "Beruf", "occupation")
        .with(De, En, "Eltern", "parent")
        .with(De, En, "Haustier", "pet");
    let mut vote_map = KeyTranslationMap::new();
    vote_map.insert_votes(De, Category::Person, "Geboren", BTreeMap::from([("born".to_string(), 3)]));

    // The relaxed one-way stage only adds pairs when its threshold sits below
    // the bidirectional key+value threshold.
    let mut thresholds = ThresholdSet::default();
    for (m, v) in [(Module::M1, 0.8), (Module::M2, 0.64), (Module::M3, 0.7), (Module::M4, 0.6), (Module::M5, 0.5)] {
        thresholds.set(PairClass::EnglishInvolved, m, T::lit(v));
    }
    let expected = vec![
        (0, vec![0], Module::M1),
        (1, vec![1], Module::M2),
        (2, vec![2], Module::M3),
        (3, vec![3], Module::M4),
        (4, vec![4, 5], Module::M5),
    ];
    PlantedStage { src, tgt, translator, vote_map, thresholds, expected }
}

const KEY_WORDS: &[&str] = &["born", "died", "spouse", "name", "children", "club", "team", "years", "area", "total", "height", "award"];
const VALUE_WORDS: &[&str] = &["paris", "berlin", "1990", "2004", "red", "blue", "city", "river", "north", "gold", "silver", "league"];

/// A random table pair drawn from small vocabularies so that every stage
/// gets work. Both sides translate as the identity.
pub struct SyntheticPair {
    pub src: Infobox,
    pub tgt: Infobox,
    pub translator: DictionaryTranslator,
    pub vote_map: KeyTranslationMap,
}

fn phrase<R: rand::Rng>(rng: &mut R, words: &[&str], max: usize) -> String {
    let n = rng.gen_range(1..=max);
    (0..n).map(|_| words[rng.gen_range(0..words.len())]).collect::<Vec<_>>().join(" ")
}

fn synthetic_table<R: rand::Rng>(rng: &mut R, language: LanguageCode, max_rows: usize) -> Infobox {
    let n = rng.gen_range(1..=max_rows);
    let rows = (0..n)
        .map(|_| {
            let key = phrase(rng, KEY_WORDS, 2);
            let values: Vec<String> = (0..rng.gen_range(1..=2)).map(|_| phrase(rng, VALUE_WORDS, 3)).collect();
            Row::new(key, values).expect("non-empty synthetic row")
        })
        .collect();
    Infobox::new("S1", language, Category::Person, date(2023, 1, 1), rows).expect("synthetic table")
}

pub fn synthetic_pair<R: rand::Rng>(rng: &mut R, max_rows: usize) -> SyntheticPair {
    const LANGS: [LanguageCode; 4] = [LanguageCode::En, LanguageCode::De, LanguageCode::Hi, LanguageCode::Fr];
    let a = LANGS[rng.gen_range(0..LANGS.len())];
    let b = LANGS[rng.gen_range(0..LANGS.len())];
    let src = synthetic_table(rng, a, max_rows);
    let tgt = synthetic_table(rng, b, max_rows);
    let mut vote_map = KeyTranslationMap::new();
    for t in [&src, &tgt] {
        if t.language.is_english() {
            continue;
        }
        for row in &t.rows {
            if rng.gen_bool(0.6) {
                let english = if rng.gen_bool(0.8) { row.key.clone() } else { phrase(rng, KEY_WORDS, 2) };
                vote_map.insert_votes(t.language, t.category, &row.key, BTreeMap::from([(english, 1)]));
            }
        }
    }
    SyntheticPair { src, tgt, translator: DictionaryTranslator::new().passthrough(), vote_map }
}

/// en/fr pairs whose M1 key similarities are set exactly: `true_scores`
/// belong to gold pairs, `decoy_scores` to pairs absent from gold. Each
/// pair lives in its own two-dimensional subspace, so cross similarities
/// are zero.
pub struct TuningFixture<T: Scalar> {
    pub pairs: Vec<(Infobox, Infobox, crate::corpus::GoldAlignment)>,
    pub translator: DictionaryTranslator,
    pub embedder: crate::providers::TableEmbedder<T>,
    pub vote_map: KeyTranslationMap,
}

pub fn tuning_fixture<T: Scalar>(entities: &[(&[f64], &[f64])]) -> TuningFixture<T> {
    use crate::corpus::{GoldAlignment, Split};
    let total: usize = entities.iter().map(|(t, d)| t.len() + d.len()).sum();
    let dim = 2 * total.max(1);
    let mut embedder = crate::providers::TableEmbedder::new();
    let mut vote_map = KeyTranslationMap::new();
    let mut pairs = Vec::new();
    let mut slot = 0;
    for (e, (trues, decoys)) in entities.iter().enumerate() {
        let entity = format!("T{e}");
        let mut src_rows = Vec::new();
        let mut tgt_rows = Vec::new();
        let mut gold = Vec::new();
        for (k, &score) in trues.iter().chain(decoys.iter()).enumerate() {
            let (sk, tk) = (format!("e{e}k{k}"), format!("f{e}k{k}"));
            let mut a = vec![T::zero(); dim];
            let mut b = vec![T::zero(); dim];
            a[2 * slot] = T::one();
            b[2 * slot] = T::lit(score);
            b[2 * slot + 1] = T::lit((1.0 - score * score).max(0.0).sqrt());
            embedder.insert(&sk, a);
            embedder.insert(&tk, b);
            vote_map.insert_votes(LanguageCode::Fr, Category::Person, &tk, BTreeMap::from([(tk.clone(), 1)]));
            src_rows.push(Row::new(sk, ["v"]).expect("row"));
            tgt_rows.push(Row::new(tk, ["v"]).expect("row"));
            if k < trues.len() {
                gold.push((k, k));
            }
            slot += 1;
        }
        let src = Infobox::new(&entity, LanguageCode::En, Category::Person, date(2023, 1, 1), src_rows).expect("table");
        let tgt = Infobox::new(&entity, LanguageCode::Fr, Category::Person, date(2023, 1, 1), tgt_rows).expect("table");
        let g = GoldAlignment::new(&entity, LanguageCode::En, LanguageCode::Fr, gold).expect("gold").with_split(Split::Validation);
        pairs.push((src, tgt, g));
    }
    TuningFixture { pairs, translator: DictionaryTranslator::new().passthrough(), embedder, vote_map }
}

/// Table counts per language as published for the full corpus.
pub const TABLE_COUNTS: [(LanguageCode, usize); 14] = [
    (LanguageCode::Af, 1575),
    (LanguageCode::Ar, 7648),
    (LanguageCode::Ceb, 3870),
    (LanguageCode::De, 8215),
    (LanguageCode::En, 12431),
    (LanguageCode::Es, 9920),
    (LanguageCode::Fr, 10858),
    (LanguageCode::Hi, 1724),
    (LanguageCode::Ko, 6601),
    (LanguageCode::Nl, 7837),
    (LanguageCode::Ru, 9066),
    (LanguageCode::Sv, 7985),
    (LanguageCode::Tr, 5599),
    (LanguageCode::Zh, 7140),
];

/// One hand-checked rule scenario: a table pair and the proposals the
/// engine must emit, as `(rule, direction, src_row, tgt_row)`.
pub struct RuleCase {
    pub name: &'static str,
    pub x: Infobox,
    pub y: Infobox,
    pub expected: Vec<(crate::update::Rule, crate::update::Direction, Option<usize>, Option<usize>)>,
}

/// Embedder for the rule scenarios: bag of words, except for the merged
/// parent rows which get exact vectors.
pub fn rule_embedder() -> crate::providers::TableEmbedder<f64> {
    use crate::providers::{HashedBowEmbedder, TableEmbedder};
    let dim = HashedBowEmbedder::DEFAULT_DIM;
    let v = |xs: &[f64]| {
        let mut out = vec![0.0; dim];
        out[..xs.len()].copy_from_slice(xs);
        out
    };
    let side = (1.0f64 - 0.95 * 0.95).sqrt();
    TableEmbedder::new()
        .with("Parents", v(&[1.0, 0.0, 0.0, 0.0]))
        .with("Father", v(&[0.95, side, 0.0, 0.0]))
        .with("Mother", v(&[0.95, 0.0, side, 0.0]))
        .with("Parents Alice Bob", v(&[0.0, 0.0, 0.0, 1.0]))
        .with("Father Alice", v(&[0.0, 0.6, 0.0, 0.8]))
        .with("Mother Bob", v(&[0.0, 0.0, 0.6, 0.8]))
        .with("Alice", v(&[0.0, 0.0, 0.6, 0.8]))
        .with("Bob", v(&[0.0, 0.6, 0.0, 0.8]))
        .with("Alice Bob", v(&[0.0, 0.0, 0.0, 1.0]))
        .with_fallback(HashedBowEmbedder::default())
}

/// Trend defaults plus two rare keys.
pub fn rule_config() -> crate::update::UpdateConfig {
    let mut c = crate::update::UpdateConfig::default();
    c.rare_keys = ["motto", "nickname"].iter().map(|s| s.to_string()).collect();
    c
}

pub fn rule_stats() -> crate::corpus::CorpusStats {
    crate::corpus::CorpusStats::from_table_counts(TABLE_COUNTS)
}

pub fn rule_cases() -> Vec<RuleCase> {
    use crate::update::{Direction, Rule};
    use LanguageCode::{Af, Ar, En};
    let c = Category::Person;
    let en_ar = Direction::new(En, Ar);
    let ar_en = Direction::new(Ar, En);
    let en_af = Direction::new(En, Af);
    vec![
        RuleCase {
            name: "row transfer",
            x: table("R1", En, c, &[("Born", &["1900"]), ("Thesis", &["On relativity"])]),
            y: table("R1", Ar, c, &[("Born", &["1900"])]),
            expected: vec![(Rule::R1, en_ar, Some(1), None)],
        },
        RuleCase {
            name: "multi match",
            x: table("R2", En, c, &[("Parents", &["Alice", "Bob"])]),
            y: table("R2", Ar, c, &[("Father", &["Alice"]), ("Mother", &["Bob"])]),
            expected: vec![(Rule::R2, en_ar, Some(0), None)],
        },
        RuleCase {
            name: "latest time",
            x: table("R3", En, c, &[("Population", &["1,400,000 (2021)"])]),
            y: table("R3", Ar, c, &[("Population", &["1,350,000 (2018)"])]),
            expected: vec![(Rule::R3, en_ar, Some(0), Some(0))],
        },
        RuleCase {
            name: "latest time over resource tier",
            x: table("R3b", En, c, &[("Population", &["1,400,000 (2021)"])]),
            y: table("R3b", Af, c, &[("Population", &["1,350,000 (2018)"])]),
            expected: vec![(Rule::R3, en_af, Some(0), Some(0))],
        },
        RuleCase {
            name: "increasing trend",
            x: table("R4", En, c, &[("Career goals", &["120"])]),
            y: table("R4", Ar, c, &[("Career goals", &["95"])]),
            expected: vec![(Rule::R4, en_ar, Some(0), Some(0))],
        },
        RuleCase {
            name: "increasing trend, other way",
            x: table("R4b", En, c, &[("Career goals", &["80"])]),
            y: table("R4b", Ar, c, &[("Career goals", &["95"])]),
            expected: vec![(Rule::R4, ar_en, Some(0), Some(0))],
        },
        RuleCase {
            name: "append value",
            x: table("R5", En, c, &[("Occupation", &["actor", "producer"])]),
            y: table("R5", Ar, c, &[("Occupation", &["actor"])]),
            expected: vec![(Rule::R5, en_ar, Some(0), Some(0))],
        },
        RuleCase {
            name: "high to low resource",
            x: table("R6", En, c, &[("Capital", &["Pretoria"])]),
            y: table("R6", Af, c, &[("Capital", &["Kaapstad"])]),
            expected: vec![(Rule::R6, en_af, Some(0), Some(0))],
        },
        RuleCase {
            name: "bigger to smaller",
            x: table("R7", En, c, &[("Area", &["5 km2"]), ("Mayor", &["Ann"]), ("Motto", &["Forward"])]),
            y: table("R7", Ar, c, &[("Area", &["5 km2"]), ("Mayor", &["Bob"])]),
            expected: vec![(Rule::R1, en_ar, Some(2), None), (Rule::R7, en_ar, Some(1), Some(1))],
        },
        RuleCase {
            name: "rare keys",
            x: table("R8", En, c, &[("Coach", &["Ann"]), ("Stadium", &["Arena"]), ("Nickname", &["Kid"])]),
            y: table("R8", Ar, c, &[("Coach", &["Bob"]), ("Stadium", &["Arena"]), ("Founded", &["Long ago"])]),
            expected: vec![
                (Rule::R1, en_ar, Some(2), None),
                (Rule::R1, ar_en, Some(2), None),
                (Rule::R8, en_ar, Some(0), Some(0)),
            ],
        },
    ]
}

/// A single pair yielding five row transfers, one time-based substitution
/// and one value addition.
pub fn propose_case() -> RuleCase {
    use crate::update::{Direction, Rule};
    use LanguageCode::{Ar, En};
    let c = Category::Person;
    let en_ar = Direction::new(En, Ar);
    let ar_en = Direction::new(Ar, En);
    RuleCase {
        name: "mixed",
        x: table(
            "P1",
            En,
            c,
            &[
                ("Population", &["1,400,000 (2021)"]),
                ("Occupation", &["actor", "producer"]),
                ("Thesis", &["Quantum"]),
                ("Hobby", &["Chess"]),
                ("Pet", &["Cat"]),
            ],
        ),
        y: table(
            "P1",
            Ar,
            c,
            &[("Population", &["1,350,000 (2018)"]), ("Occupation", &["actor"]), ("Anthem", &["Song"]), ("Currency", &["Rand"])],
        ),
        expected: vec![
            (Rule::R1, en_ar, Some(2), None),
            (Rule::R1, en_ar, Some(3), None),
            (Rule::R1, en_ar, Some(4), None),
            (Rule::R1, ar_en, Some(2), None),
            (Rule::R1, ar_en, Some(3), None),
            (Rule::R3, en_ar, Some(0), Some(0)),
            (Rule::R5, en_ar, Some(1), Some(1)),
        ],
    }
}

const DISTINCT_KEYS: &[&str] = &[
    "born", "died", "spouse", "children", "club", "team", "height", "award", "capital", "mayor", "founded", "anthem",
    "currency", "motto", "nickname", "coach", "stadium", "genre", "label", "website",
];

/// A table and an edited copy in another language: rows dropped, values
/// replaced at the same length or trimmed, and rows only the copy has. Keys are distinct
/// single words, so rows keep their counterparts across edits.
pub fn perturbed_pair<R: rand::Rng>(rng: &mut R, max_rows: usize) -> (Infobox, Infobox) {
    use rand::seq::SliceRandom;
    let mut keys: Vec<&str> = DISTINCT_KEYS.to_vec();
    keys.shuffle(rng);
    let n = rng.gen_range(1..=max_rows.clamp(1, keys.len() / 2));
    let (own, extra) = keys.split_at(n);
    let values = |rng: &mut R| -> Vec<String> {
        let mut vs: Vec<&str> = VALUE_WORDS.to_vec();
        vs.shuffle(rng);
        vs.truncate(rng.gen_range(1..=3));
        vs.into_iter().map(str::to_string).collect()
    };
    let x_rows: Vec<Row> = own.iter().map(|k| Row::new(*k, values(rng)).expect("row")).collect();
    let mut y_rows = Vec::new();
    for r in &x_rows {
        match rng.gen_range(0..5) {
            0 => {}
            1 => {
                let mut vs: Vec<&str> = VALUE_WORDS.to_vec();
                vs.shuffle(rng);
                let vs: Vec<String> = vs[..r.values.len()].iter().map(|v| v.to_string()).collect();
                y_rows.push(Row::new(r.key.clone(), vs).expect("row"))
            }
            2 if r.values.len() > 1 => y_rows.push(Row::new(r.key.clone(), r.values[..1].to_vec()).expect("row")),
            _ => y_rows.push(r.clone()),
        }
    }
    for k in extra.iter().take(rng.gen_range(0..=2)) {
        y_rows.push(Row::new(*k, values(rng)).expect("row"));
    }
    if y_rows.is_empty() {
        y_rows.push(x_rows[0].clone());
    }
    y_rows.shuffle(rng);
    const LANGS: [LanguageCode; 4] = [LanguageCode::En, LanguageCode::Af, LanguageCode::Ar, LanguageCode::Fr];
    let a = rng.gen_range(0..LANGS.len());
    let b = (a + rng.gen_range(1..LANGS.len())) % LANGS.len();
    let cat = Category::Person;
    let x = Infobox::new("G", LANGS[a], cat, date(2023, 1, 1), x_rows).expect("table");
    let y = Infobox::new("G", LANGS[b], cat, date(2023, 1, 1), y_rows).expect("table");
    (x, y)
}
