//! Priority-ordered update rules over an aligned table pair.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{normalize_key, LanguageCode};
use crate::providers::ProviderError;

mod apply;
mod rules;
mod time;

pub use apply::{apply_proposals, synchronize_fixpoint, ApplyError, SyncError, SyncOutcome, MAX_SYNC_ROUNDS};
pub use rules::{apply_rules, RuleEngine, RuleFailure, RuleOutput};
pub use time::{extract_time, parse_numeric, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
    R8,
}

impl Rule {
    pub const ALL: [Rule; 8] = [Rule::R1, Rule::R2, Rule::R3, Rule::R4, Rule::R5, Rule::R6, Rule::R7, Rule::R8];

    /// Priority rank; lower runs first.
    pub fn rank(self) -> u8 {
        self as u8 + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            Rule::R1 => "Row Transfer",
            Rule::R2 => "Multi-Match",
            Rule::R3 => "Latest Time",
            Rule::R4 => "Trend",
            Rule::R5 => "Append Value",
            Rule::R6 => "High to Low Resource",
            Rule::R7 => "Bigger to Smaller",
            Rule::R8 => "Rare Keys",
        }
    }

    /// The edit type this rule emits as its primary change.
    pub fn edit_type(self) -> EditType {
        match self {
            Rule::R1 => EditType::RowAddition,
            Rule::R2 => EditType::RowDelete,
            Rule::R5 => EditType::ValueAddition,
            _ => EditType::ValueSubstitute,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", self.rank())
    }
}

impl FromStr for Rule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Rule::ALL.into_iter().find(|r| r.to_string().eq_ignore_ascii_case(s.trim())).ok_or_else(|| format!("unknown rule `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EditType {
    RowAddition,
    RowDelete,
    ValueSubstitute,
    ValueAddition,
}

impl fmt::Display for EditType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Source and target language of an edit, written `en->hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Direction {
    pub src: LanguageCode,
    pub tgt: LanguageCode,
}

impl Direction {
    pub fn new(src: LanguageCode, tgt: LanguageCode) -> Self {
        Direction { src, tgt }
    }

    pub fn reversed(self) -> Self {
        Direction { src: self.tgt, tgt: self.src }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.src, self.tgt)
    }
}

impl FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once("->").ok_or_else(|| format!("direction `{s}` is not of the form src->tgt"))?;
        Ok(Direction { src: a.trim().parse().map_err(|e| format!("{e}"))?, tgt: b.trim().parse().map_err(|e| format!("{e}"))? })
    }
}

impl Serialize for Direction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Direction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Why a rule fired. Only the fields relevant to the rule are set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Evidence {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub module: Option<crate::alignment::Module>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src_time: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tgt_time: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trend: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src_number: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tgt_number: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src_tier: Option<crate::corpus::Tier>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tgt_tier: Option<crate::corpus::Tier>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src_rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tgt_rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src_rare_keys: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tgt_rare_keys: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_similarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditProposal {
    pub id: String,
    pub rule: Rule,
    #[serde(rename = "type")]
    pub edit_type: EditType,
    pub direction: Direction,
    pub entity_id: String,
    /// Key of the affected row as it reads, or will read, in the target table.
    pub key: String,
    /// Key of the originating row in the source table.
    pub source_key: String,
    pub src_row: Option<usize>,
    pub tgt_row: Option<usize>,
    /// Target rows removed by a merge.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deleted_rows: Vec<usize>,
    pub old: Vec<String>,
    pub new: Vec<String>,
    #[serde(default)]
    pub evidence: Evidence,
}

impl EditProposal {
    /// Content hash over everything except the id itself.
    pub fn content_id(&self) -> String {
        let mut h = Sha256::new();
        let parts = [
            self.entity_id.clone(),
            self.direction.to_string(),
            self.rule.to_string(),
            format!("{:?}/{:?}/{:?}", self.src_row, self.tgt_row, self.deleted_rows),
            self.key.clone(),
            self.old.join("\u{1f}"),
            self.new.join("\u{1f}"),
        ];
        for p in parts {
            h.update(p.as_bytes());
            h.update([0u8]);
        }
        hex::encode(&h.finalize()[..8])
    }

    /// Checks the rule, edit type and row references agree.
    pub fn validate(&self) -> Result<(), String> {
        let expect = self.rule.edit_type();
        if self.edit_type != expect {
            return Err(format!("{} emits {expect}, not {}", self.rule, self.edit_type));
        }
        match self.edit_type {
            EditType::RowAddition if self.tgt_row.is_some() => Err("row addition cannot reference a target row".into()),
            EditType::RowDelete if self.deleted_rows.is_empty() => Err("row delete without rows".into()),
            EditType::ValueSubstitute | EditType::ValueAddition if self.src_row.is_none() || self.tgt_row.is_none() => {
                Err("value edits need an aligned row pair".into())
            }
            _ if self.new.is_empty() => Err("empty new content".into()),
            _ => Ok(()),
        }
    }
}

/// Proposal counts per rule, zero-filled.
pub fn rule_summary<'a>(proposals: impl IntoIterator<Item = &'a EditProposal>) -> BTreeMap<Rule, usize> {
    let mut out: BTreeMap<Rule, usize> = Rule::ALL.iter().map(|r| (*r, 0)).collect();
    for p in proposals {
        *out.entry(p.rule).or_default() += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UpdateConfig {
    /// English keys whose values only grow over time.
    pub pos_trend_keys: BTreeSet<String>,
    /// English keys whose values only shrink over time.
    pub neg_trend_keys: BTreeSet<String>,
    /// English keys considered rare. Usually filled from corpus statistics.
    pub rare_keys: BTreeSet<String>,
    pub rare_key_cutoff: usize,
    pub row_gap_ratio: f64,
    pub hr_lr: bool,
    pub value_difference_threshold: f64,
    pub difference_mode: DifferenceMode,
}

/// How string inequality and embedding dissimilarity combine when deciding
/// that two translated value lists differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifferenceMode {
    /// Either test suffices.
    #[default]
    Either,
    /// Both must hold.
    Both,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        UpdateConfig {
            pos_trend_keys: set(&[
                "appearances",
                "awards",
                "caps",
                "career goals",
                "children",
                "goals",
                "matches",
                "number of albums",
                "titles",
                "wins",
            ]),
            neg_trend_keys: set(&["best time", "personal best", "record time"]),
            rare_keys: BTreeSet::new(),
            rare_key_cutoff: 50,
            row_gap_ratio: 1.5,
            hr_lr: true,
            value_difference_threshold: 0.9,
            difference_mode: DifferenceMode::Either,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("key `{0}` is in both trend lists")]
    TrendOverlap(String),
    #[error("row_gap_ratio must be greater than 1, got {0}")]
    RowGapRatio(f64),
    #[error("value_difference_threshold must lie in [0, 1], got {0}")]
    DifferenceThreshold(f64),
}

impl UpdateConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let pos: BTreeSet<String> = self.pos_trend_keys.iter().map(|k| normalize_key(k)).collect();
        if let Some(k) = self.neg_trend_keys.iter().map(|k| normalize_key(k)).find(|k| pos.contains(k)) {
            return Err(ConfigError::TrendOverlap(k));
        }
        if !(self.row_gap_ratio > 1.0) {
            return Err(ConfigError::RowGapRatio(self.row_gap_ratio));
        }
        if !(0.0..=1.0).contains(&self.value_difference_threshold) {
            return Err(ConfigError::DifferenceThreshold(self.value_difference_threshold));
        }
        Ok(())
    }

    /// Parses and validates a JSON config.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let c: UpdateConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        c.validate().map_err(|e| e.to_string())?;
        Ok(c)
    }

    pub(crate) fn trend(&self, english_key: &str) -> Option<Trend> {
        let k = normalize_key(english_key);
        let has = |set: &BTreeSet<String>| set.iter().any(|x| normalize_key(x) == k);
        if has(&self.pos_trend_keys) {
            Some(Trend::Increasing)
        } else if has(&self.neg_trend_keys) {
            Some(Trend::Decreasing)
        } else {
            None
        }
    }

    pub(crate) fn is_rare(&self, english_key: &str) -> bool {
        let k = normalize_key(english_key);
        self.rare_keys.contains(&k) || self.rare_keys.iter().any(|x| normalize_key(x) == k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Trend {
    Increasing,
    Decreasing,
}

#[derive(Debug, Error)]
pub enum UpdateError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}
