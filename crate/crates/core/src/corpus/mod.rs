//! Infobox data model, gold alignments and corpus-level statistics.

mod html;
mod io;
mod stats;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use html::{parse_infobox_html, HtmlError, HtmlMeta};
pub use io::{load_corpus, load_corpus_lenient, parse_gold_line, parse_infobox_line, save_corpus, RecordError};
pub use stats::{
    compute_stats, normalize_key, rare_keys, resource_tier, row_difference, transfer_stats,
    CategorySpread, CorpusStats, Tier, TransferStats,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    #[error("unknown language code `{0}`")]
    UnknownLanguage(String),
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("unknown challenge label `{0}`")]
    UnknownLabel(String),
    #[error("invalid row: {0}")]
    InvalidRow(String),
    #[error("invalid infobox `{entity}`: {reason}")]
    InvalidInfobox { entity: String, reason: String },
    #[error("invalid gold alignment `{entity}`: {reason}")]
    InvalidGold { entity: String, reason: String },
    #[error("{file}:{line}: {message}")]
    Record { file: String, line: usize, message: String },
    #[error("{count} record(s) failed to load; first: {first}")]
    Records { count: usize, first: Box<RecordError> },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

macro_rules! closed_set {
    (
        $(#[$meta:meta])*
        $name:ident, $err:ident { $($variant:ident => $code:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $($name::$variant => $code),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = CorpusError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let needle = s.trim();
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str().eq_ignore_ascii_case(needle))
                    .ok_or_else(|| CorpusError::$err(s.to_string()))
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(d)?;
                raw.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

closed_set! {
    /// One of the fourteen supported wiki languages.
    LanguageCode, UnknownLanguage {
        En => "en", Fr => "fr", De => "de", Ko => "ko", Ru => "ru", Ar => "ar", Zh => "zh",
        Hi => "hi", Ceb => "ceb", Es => "es", Sv => "sv", Nl => "nl", Tr => "tr", Af => "af",
    }
}

closed_set! {
    /// Entity topic of an infobox.
    Category, UnknownCategory {
        Airport => "Airport", Album => "Album", Animal => "Animal", Athlete => "Athlete",
        Book => "Book", City => "City", College => "College", Company => "Company",
        Country => "Country", Diseases => "Diseases", Food => "Food", Medicine => "Medicine",
        Monument => "Monument", Movie => "Movie", Musician => "Musician", Nobel => "Nobel",
        Painting => "Painting", Person => "Person", Planet => "Planet", Shows => "Shows",
        Stadium => "Stadium",
    }
}

closed_set! {
    /// Annotated alignment challenge carried by a gold row pair.
    ChallengeLabel, UnknownLabel {
        Mi => "MI", Oi => "OI", Ir => "IR", Ui => "UI", Lv => "LV", Sv => "SV", Eel => "EEL",
    }
}

impl LanguageCode {
    pub fn is_english(&self) -> bool {
        matches!(self, LanguageCode::En)
    }
}

/// A single key → values row of an infobox.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Row {
    pub key: String,
    pub values: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
}

impl Row {
    /// Builds a row, trimming the key and values and dropping empty or
    /// repeated values while keeping first-seen order.
    pub fn new<K, I, V>(key: K, values: I) -> Result<Self, CorpusError>
    where
        K: AsRef<str>,
        I: IntoIterator<Item = V>,
        V: AsRef<str>,
    {
        let key = key.as_ref().trim().to_string();
        if key.is_empty() {
            return Err(CorpusError::InvalidRow("empty key".into()));
        }
        let mut out: Vec<String> = Vec::new();
        for v in values {
            let v = v.as_ref().trim();
            if !v.is_empty() && !out.iter().any(|seen| seen == v) {
                out.push(v.to_string());
            }
        }
        if out.is_empty() {
            return Err(CorpusError::InvalidRow(format!("row `{key}` has no values")));
        }
        Ok(Row { key, values: out, raw: None })
    }

    pub fn with_raw(mut self, raw: impl Into<String>) -> Self {
        self.raw = Some(raw.into());
        self
    }

    /// Key followed by values, joined by single spaces.
    pub fn text(&self) -> String {
        let mut s = self.key.clone();
        for v in &self.values {
            s.push(' ');
            s.push_str(v);
        }
        s
    }

    pub fn values_text(&self) -> String {
        self.values.join(" ")
    }
}

impl<'de> Deserialize<'de> for Row {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            key: String,
            values: Vec<String>,
            #[serde(default)]
            raw: Option<String>,
        }
        let w = Wire::deserialize(d)?;
        let row = Row::new(w.key, w.values).map_err(serde::de::Error::custom)?;
        Ok(Row { raw: w.raw, ..row })
    }
}

/// One entity's infobox in one language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Infobox {
    pub entity_id: String,
    pub language: LanguageCode,
    pub category: Category,
    pub extracted_at: NaiveDate,
    pub rows: Vec<Row>,
}

impl Infobox {
    pub fn new(
        entity_id: impl Into<String>,
        language: LanguageCode,
        category: Category,
        extracted_at: NaiveDate,
        rows: Vec<Row>,
    ) -> Result<Self, CorpusError> {
        let ib = Infobox { entity_id: entity_id.into(), language, category, extracted_at, rows };
        ib.validate()?;
        Ok(ib)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.entity_id.trim().is_empty() {
            return Err(CorpusError::InvalidInfobox {
                entity: self.entity_id.clone(),
                reason: "empty entity_id".into(),
            });
        }
        if self.rows.is_empty() {
            return Err(CorpusError::InvalidInfobox {
                entity: self.entity_id.clone(),
                reason: "no rows".into(),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Train/validation split marker on a gold record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Validation,
    #[default]
    Test,
}

/// A row reference in a gold label map: either a pair, or a row of one side
/// that the annotators left unaligned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LabelTarget {
    Pair(usize, usize),
    SrcOnly(usize),
    TgtOnly(usize),
}

impl fmt::Display for LabelTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelTarget::Pair(i, j) => write!(f, "{i},{j}"),
            LabelTarget::SrcOnly(i) => write!(f, "{i},-"),
            LabelTarget::TgtOnly(j) => write!(f, "-,{j}"),
        }
    }
}

impl FromStr for LabelTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once(',').ok_or_else(|| format!("label key `{s}` is not `i,j`"))?;
        let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("label key `{s}`: {e}"));
        match (a.trim(), b.trim()) {
            ("-", "-") => Err(format!("label key `{s}` names no row")),
            ("-", j) => Ok(LabelTarget::TgtOnly(parse(j)?)),
            (i, "-") => Ok(LabelTarget::SrcOnly(parse(i)?)),
            (i, j) => Ok(LabelTarget::Pair(parse(i)?, parse(j)?)),
        }
    }
}

/// Manual row alignment for one entity across two languages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldAlignment {
    pub entity_id: String,
    pub lang_a: LanguageCode,
    pub lang_b: LanguageCode,
    pub pairs: Vec<(usize, usize)>,
    pub labels: BTreeMap<LabelTarget, Vec<ChallengeLabel>>,
    pub split: Split,
}

impl GoldAlignment {
    pub fn new(
        entity_id: impl Into<String>,
        lang_a: LanguageCode,
        lang_b: LanguageCode,
        pairs: Vec<(usize, usize)>,
    ) -> Result<Self, CorpusError> {
        let g = GoldAlignment {
            entity_id: entity_id.into(),
            lang_a,
            lang_b,
            pairs,
            labels: BTreeMap::new(),
            split: Split::Test,
        };
        g.validate(None)?;
        Ok(g)
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn with_label(mut self, target: LabelTarget, label: ChallengeLabel) -> Self {
        let entry = self.labels.entry(target).or_default();
        if !entry.contains(&label) {
            entry.push(label);
        }
        self
    }

    /// Checks for duplicate pairs and, when table sizes are known, index range.
    pub fn validate(&self, sizes: Option<(usize, usize)>) -> Result<(), CorpusError> {
        let err = |reason: String| CorpusError::InvalidGold { entity: self.entity_id.clone(), reason };
        let mut seen = std::collections::BTreeSet::new();
        for &(i, j) in &self.pairs {
            if !seen.insert((i, j)) {
                return Err(err(format!("duplicate pair ({i},{j})")));
            }
            if let Some((na, nb)) = sizes {
                if i >= na || j >= nb {
                    return Err(err(format!("pair ({i},{j}) out of range for tables of {na} and {nb} rows")));
                }
            }
        }
        if self.lang_a == self.lang_b {
            return Err(err("both sides share one language".into()));
        }
        Ok(())
    }

    pub fn mirrored(&self) -> GoldAlignment {
        let labels = self
            .labels
            .iter()
            .map(|(t, l)| {
                let t = match *t {
                    LabelTarget::Pair(i, j) => LabelTarget::Pair(j, i),
                    LabelTarget::SrcOnly(i) => LabelTarget::TgtOnly(i),
                    LabelTarget::TgtOnly(j) => LabelTarget::SrcOnly(j),
                };
                (t, l.clone())
            })
            .collect();
        GoldAlignment {
            entity_id: self.entity_id.clone(),
            lang_a: self.lang_b,
            lang_b: self.lang_a,
            pairs: self.pairs.iter().map(|&(i, j)| (j, i)).collect(),
            labels,
            split: self.split,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GoldWire {
    entity_id: String,
    lang_a: LanguageCode,
    lang_b: LanguageCode,
    pairs: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    labels: BTreeMap<String, LabelValue>,
    #[serde(default)]
    split: Split,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LabelValue {
    One(ChallengeLabel),
    Many(Vec<ChallengeLabel>),
}

impl Serialize for GoldAlignment {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let labels = self
            .labels
            .iter()
            .map(|(t, l)| {
                let v = if l.len() == 1 { LabelValue::One(l[0]) } else { LabelValue::Many(l.clone()) };
                (t.to_string(), v)
            })
            .collect();
        GoldWire {
            entity_id: self.entity_id.clone(),
            lang_a: self.lang_a,
            lang_b: self.lang_b,
            pairs: self.pairs.clone(),
            labels,
            split: self.split,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GoldAlignment {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = GoldWire::deserialize(d)?;
        let mut labels = BTreeMap::new();
        for (k, v) in w.labels {
            let target: LabelTarget = k.parse().map_err(serde::de::Error::custom)?;
            let list = match v {
                LabelValue::One(l) => vec![l],
                LabelValue::Many(l) => l,
            };
            labels.insert(target, list);
        }
        let g = GoldAlignment {
            entity_id: w.entity_id,
            lang_a: w.lang_a,
            lang_b: w.lang_b,
            pairs: w.pairs,
            labels,
            split: w.split,
        };
        g.validate(None).map_err(serde::de::Error::custom)?;
        Ok(g)
    }
}

/// Immutable collection of infoboxes plus optional gold alignments.
///
/// Tables are kept sorted by (language, entity) so that loading, saving and
/// statistics are independent of file and record order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    tables: Vec<Infobox>,
    gold: Vec<GoldAlignment>,
}

impl Corpus {
    pub fn new(mut tables: Vec<Infobox>, mut gold: Vec<GoldAlignment>) -> Self {
        tables.sort_by(|a, b| (a.language, &a.entity_id).cmp(&(b.language, &b.entity_id)));
        gold.sort_by(|a, b| {
            (&a.entity_id, a.lang_a, a.lang_b).cmp(&(&b.entity_id, b.lang_a, b.lang_b))
        });
        Corpus { tables, gold }
    }

    pub fn tables(&self) -> &[Infobox] {
        &self.tables
    }

    pub fn gold(&self) -> &[GoldAlignment] {
        &self.gold
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// First table for `entity` in `language`.
    pub fn table(&self, entity: &str, language: LanguageCode) -> Option<&Infobox> {
        self.tables.iter().find(|t| t.language == language && t.entity_id == entity)
    }

    pub fn languages(&self) -> Vec<LanguageCode> {
        let mut langs: Vec<_> = self.tables.iter().map(|t| t.language).collect();
        langs.dedup();
        langs
    }

    /// Entities present in both languages, sorted.
    pub fn shared_entities(&self, a: LanguageCode, b: LanguageCode) -> Vec<String> {
        let in_b: std::collections::BTreeSet<&str> = self
            .tables
            .iter()
            .filter(|t| t.language == b)
            .map(|t| t.entity_id.as_str())
            .collect();
        let mut out: Vec<String> = self
            .tables
            .iter()
            .filter(|t| t.language == a && in_b.contains(t.entity_id.as_str()))
            .map(|t| t.entity_id.clone())
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn into_parts(self) -> (Vec<Infobox>, Vec<GoldAlignment>) {
        (self.tables, self.gold)
    }
}
