//! Row alignment between two language versions of an infobox.
//!
//! Five stages run in order, each only over rows the earlier stages left
//! unaligned:
//!
//! * `M1` key embeddings of corpus-voted English key translations,
//! * `M2` key embeddings of direct translations,
//! * `M3` key + value text,
//! * `M4` key + value text, accepting a pair when it is the best match in
//!   either direction rather than both,
//! * `M5` one source row against two target rows whose merged values explain
//!   the source row better than either alone.
//!
//! `M1`–`M3` use [`greedy_mutual_match`].

mod matching;
mod pipeline;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::LanguageCode;
use crate::providers::{ProviderError, TableTranslationError};
use crate::scalar::Scalar;

pub use matching::{greedy_mutual_match, one_way_best_match, Match, SimilarityMatrix};
pub use pipeline::{align_many, Aligner};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Module {
    M1,
    M2,
    M3,
    M4,
    M5,
}

impl Module {
    pub const ALL: [Module; 5] = [Module::M1, Module::M2, Module::M3, Module::M4, Module::M5];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Module::M1 => "corpus-based",
            Module::M2 => "key-only",
            Module::M3 => "key-value bidirectional",
            Module::M4 => "key-value unidirectional",
            Module::M5 => "multi-key",
        }
    }
}

impl fmt::Display for Module {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.index() + 1)
    }
}

impl FromStr for Module {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "M1" => Ok(Module::M1),
            "M2" => Ok(Module::M2),
            "M3" => Ok(Module::M3),
            "M4" => Ok(Module::M4),
            "M5" => Ok(Module::M5),
            other => Err(format!("unknown alignment module `{other}` (expected M1..M5)")),
        }
    }
}

/// The set of enabled stages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleSet(BTreeSet<Module>);

impl ModuleSet {
    pub fn all() -> Self {
        ModuleSet(Module::ALL.into_iter().collect())
    }

    pub fn none() -> Self {
        ModuleSet(BTreeSet::new())
    }

    pub fn only(modules: impl IntoIterator<Item = Module>) -> Self {
        ModuleSet(modules.into_iter().collect())
    }

    /// Stages `M1` through `last`, inclusive.
    pub fn up_to(last: Module) -> Self {
        ModuleSet(Module::ALL.into_iter().filter(|m| *m <= last).collect())
    }

    pub fn without(mut self, m: Module) -> Self {
        self.0.remove(&m);
        self
    }

    pub fn contains(&self, m: Module) -> bool {
        self.0.contains(&m)
    }

    pub fn iter(&self) -> impl Iterator<Item = Module> + '_ {
        self.0.iter().copied()
    }

    /// Parses an ablation list such as `"M4,M5"` and removes those stages.
    pub fn ablate(list: &str) -> Result<Self, String> {
        let mut set = Self::all();
        for part in list.split(',').filter(|p| !p.trim().is_empty()) {
            set = set.without(part.parse()?);
        }
        Ok(set)
    }
}

impl Default for ModuleSet {
    fn default() -> Self {
        Self::all()
    }
}

/// Whether a table pair involves English; each class has its own thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairClass {
    EnglishInvolved,
    NonEnglish,
}

impl PairClass {
    pub fn of(a: LanguageCode, b: LanguageCode) -> Self {
        if a.is_english() || b.is_english() {
            PairClass::EnglishInvolved
        } else {
            PairClass::NonEnglish
        }
    }
}

/// Per-stage thresholds for both pair classes, indexed `M1..M5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct ThresholdSet<T: Scalar> {
    pub english_involved: [T; 5],
    pub non_english: [T; 5],
}

impl<T: Scalar> ThresholdSet<T> {
    /// Tuned optima: `(english_involved, non_english)` per stage.
    pub const DEFAULTS: [(f64, f64); 5] = [(0.8, 0.8), (0.64, 0.6), (0.54, 0.54), (0.9, 0.54), (0.88, 0.96)];

    pub fn uniform(theta: T) -> Self {
        ThresholdSet { english_involved: [theta; 5], non_english: [theta; 5] }
    }

    pub fn get(&self, class: PairClass, module: Module) -> T {
        self.class(class)[module.index()]
    }

    pub fn set(&mut self, class: PairClass, module: Module, theta: T) {
        self.class_mut(class)[module.index()] = theta;
    }

    pub fn class(&self, class: PairClass) -> &[T; 5] {
        match class {
            PairClass::EnglishInvolved => &self.english_involved,
            PairClass::NonEnglish => &self.non_english,
        }
    }

    pub fn class_mut(&mut self, class: PairClass) -> &mut [T; 5] {
        match class {
            PairClass::EnglishInvolved => &mut self.english_involved,
            PairClass::NonEnglish => &mut self.non_english,
        }
    }

    pub fn validate(&self) -> Result<(), AlignError> {
        for (class, values) in [(PairClass::EnglishInvolved, &self.english_involved), (PairClass::NonEnglish, &self.non_english)] {
            for (i, t) in values.iter().enumerate() {
                if !(t.is_finite() && *t >= T::zero() && *t <= T::one()) {
                    return Err(AlignError::InvalidThreshold(format!("{class:?} M{}: {t} not in [0,1]", i + 1)));
                }
            }
        }
        Ok(())
    }
}

impl<T: Scalar> Default for ThresholdSet<T> {
    fn default() -> Self {
        let mut out = Self::uniform(T::zero());
        for (i, (en, non)) in Self::DEFAULTS.iter().enumerate() {
            out.english_involved[i] = T::lit(*en);
            out.non_english[i] = T::lit(*non);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairId {
    pub entity_id: String,
    pub src_lang: LanguageCode,
    pub tgt_lang: LanguageCode,
}

impl PairId {
    pub fn mirrored(&self) -> PairId {
        PairId { entity_id: self.entity_id.clone(), src_lang: self.tgt_lang, tgt_lang: self.src_lang }
    }
}

impl fmt::Display for PairId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}-{}", self.entity_id, self.src_lang, self.tgt_lang)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct AlignmentPair<T: Scalar> {
    pub src: usize,
    /// One target row, or two for `M5`.
    pub tgt: Vec<usize>,
    pub score: T,
    pub module: Module,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct AlignmentResult<T: Scalar> {
    pub pair: PairId,
    pub pairs: Vec<AlignmentPair<T>>,
    pub unaligned_src: Vec<usize>,
    pub unaligned_tgt: Vec<usize>,
}

impl<T: Scalar> AlignmentResult<T> {
    pub fn src_len(&self) -> usize {
        self.pairs.len() + self.unaligned_src.len()
    }

    pub fn tgt_len(&self) -> usize {
        self.pairs.iter().map(|p| p.tgt.len()).sum::<usize>() + self.unaligned_tgt.len()
    }

    /// Every (src, tgt) row pair, with multi-key pairs expanded.
    pub fn row_pairs(&self) -> BTreeSet<(usize, usize)> {
        self.pairs.iter().flat_map(|p| p.tgt.iter().map(move |&t| (p.src, t))).collect()
    }

    pub fn pair_for_src(&self, src: usize) -> Option<&AlignmentPair<T>> {
        self.pairs.iter().find(|p| p.src == src)
    }

    pub fn pair_for_tgt(&self, tgt: usize) -> Option<&AlignmentPair<T>> {
        self.pairs.iter().find(|p| p.tgt.contains(&tgt))
    }

    /// Share of the smaller table's rows that are aligned.
    pub fn coverage(&self) -> f64 {
        coverage(self, self.src_len(), self.tgt_len())
    }

    /// Swaps source and target. `None` when a multi-key pair cannot be
    /// expressed in the other direction.
    pub fn mirrored(&self) -> Option<AlignmentResult<T>> {
        let mut pairs = Vec::with_capacity(self.pairs.len());
        for p in &self.pairs {
            if p.tgt.len() != 1 {
                return None;
            }
            pairs.push(AlignmentPair { src: p.tgt[0], tgt: vec![p.src], score: p.score, module: p.module });
        }
        pairs.sort_by_key(|p| p.src);
        Some(AlignmentResult {
            pair: self.pair.mirrored(),
            pairs,
            unaligned_src: self.unaligned_tgt.clone(),
            unaligned_tgt: self.unaligned_src.clone(),
        })
    }

    /// Checks the structural invariants against known table sizes: each row
    /// index is in exactly one pair or unaligned list, at most two targets
    /// per pair and only for `M5`.
    pub fn validate(&self, src_len: usize, tgt_len: usize) -> Result<(), String> {
        let mut src_seen = vec![false; src_len];
        let mut tgt_seen = vec![false; tgt_len];
        let mark = |seen: &mut Vec<bool>, i: usize, side: &str| -> Result<(), String> {
            match seen.get_mut(i) {
                None => Err(format!("{side} row {i} out of range")),
                Some(true) => Err(format!("{side} row {i} appears twice")),
                Some(slot) => {
                    *slot = true;
                    Ok(())
                }
            }
        };
        for p in &self.pairs {
            match (p.tgt.len(), p.module) {
                (1, _) | (2, Module::M5) => {}
                (n, m) => return Err(format!("pair from src {} has {n} targets under {m}", p.src)),
            }
            mark(&mut src_seen, p.src, "src")?;
            for &t in &p.tgt {
                mark(&mut tgt_seen, t, "tgt")?;
            }
        }
        for &i in &self.unaligned_src {
            mark(&mut src_seen, i, "src")?;
        }
        for &j in &self.unaligned_tgt {
            mark(&mut tgt_seen, j, "tgt")?;
        }
        if src_seen.iter().chain(&tgt_seen).any(|s| !s) {
            return Err("some row is neither aligned nor listed unaligned".into());
        }
        Ok(())
    }
}

/// Distinct aligned source rows over the smaller table size.
pub fn coverage<T: Scalar>(result: &AlignmentResult<T>, src_len: usize, tgt_len: usize) -> f64 {
    let smaller = src_len.min(tgt_len);
    if smaller == 0 {
        return 0.0;
    }
    let aligned: BTreeSet<usize> = result.pairs.iter().map(|p| p.src).collect();
    aligned.len() as f64 / smaller as f64
}

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("translation failed: {0}")]
    Translate(#[from] TableTranslationError),
    #[error("stage {module} failed: {source}")]
    Stage {
        module: Module,
        #[source]
        source: ProviderError,
    },
    #[error("invalid threshold {0}")]
    InvalidThreshold(String),
}

impl AlignError {
    pub fn provider_error(&self) -> Option<&ProviderError> {
        match self {
            AlignError::Translate(e) => Some(&e.source),
            AlignError::Stage { source, .. } => Some(source),
            AlignError::InvalidThreshold(_) => None,
        }
    }
}
