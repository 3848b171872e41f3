//! Match/unmatch scoring, grouped reports and threshold tuning.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{AlignmentResult, PairId};
use crate::corpus::{ChallengeLabel, GoldAlignment, LabelTarget};
use crate::scalar::{MetricScalar, Scalar};

mod report;
mod tune;

pub use report::{evaluate_pair, group_report, EvalReport, GroupBy, KeyTier, PairEvaluation, ReportRow, Tally};
pub use tune::{tune_thresholds, GridSpec, StageTrace, TuneOutcome, ValidationPair};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gold {gold} does not describe predicted pair {predicted}")]
    PairMismatch { gold: String, predicted: String },
    #[error("gold for {pair}: {reason}")]
    InvalidGold { pair: String, reason: String },
    #[error("no validation pairs for the requested pair class")]
    EmptyValidation,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Align(#[from] crate::alignment::AlignError),
}

/// Raw set sizes behind a precision/recall figure. Summing counts and then
/// scoring gives the micro average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub predicted: usize,
    pub gold: usize,
    pub hits: usize,
}

impl Counts {
    pub fn score<T: MetricScalar>(&self) -> MatchScore<T> {
        if self.predicted == 0 && self.gold == 0 {
            return MatchScore { precision: T::one(), recall: T::one(), f1: T::one() };
        }
        let ratio = |n: usize, d: usize| if d == 0 { T::zero() } else { T::from_count(n).div(&T::from_count(d)) };
        MatchScore::from_pr(ratio(self.hits, self.predicted), ratio(self.hits, self.gold))
    }
}

impl std::ops::Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts { predicted: self.predicted + o.predicted, gold: self.gold + o.gold, hits: self.hits + o.hits }
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

impl std::iter::Sum for Counts {
    fn sum<I: Iterator<Item = Counts>>(iter: I) -> Counts {
        iter.fold(Counts::default(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchScore<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

impl<T: MetricScalar> MatchScore<T> {
    /// F1 is zero when both precision and recall are.
    pub fn from_pr(precision: T, recall: T) -> Self {
        let sum = precision.add(&recall);
        let f1 = if sum == T::zero() {
            T::zero()
        } else {
            T::from_count(2).mul(&precision).mul(&recall).div(&sum)
        };
        MatchScore { precision, recall, f1 }
    }

    pub fn to_f64(&self) -> MatchScore<f64> {
        MatchScore { precision: self.precision.to_f64(), recall: self.recall.to_f64(), f1: self.f1.to_f64() }
    }
}

fn check_pair<T: Scalar>(gold: &GoldAlignment, predicted: &AlignmentResult<T>) -> Result<(), EvalError> {
    let p = &predicted.pair;
    if gold.entity_id != p.entity_id || gold.lang_a != p.src_lang || gold.lang_b != p.tgt_lang {
        let g = PairId { entity_id: gold.entity_id.clone(), src_lang: gold.lang_a, tgt_lang: gold.lang_b };
        return Err(EvalError::PairMismatch { gold: g.to_string(), predicted: p.to_string() });
    }
    gold.validate(Some((predicted.src_len(), predicted.tgt_len())))
        .map_err(|e| EvalError::InvalidGold { pair: p.to_string(), reason: e.to_string() })
}

pub fn match_counts<T: Scalar>(gold: &GoldAlignment, predicted: &AlignmentResult<T>) -> Result<Counts, EvalError> {
    check_pair(gold, predicted)?;
    let p = predicted.row_pairs();
    let g: BTreeSet<(usize, usize)> = gold.pairs.iter().copied().collect();
    Ok(Counts { predicted: p.len(), gold: g.len(), hits: p.intersection(&g).count() })
}

/// Rows on either side: `(false, i)` for source rows, `(true, j)` for target rows.
fn unaligned(pairs: &BTreeSet<(usize, usize)>, src_len: usize, tgt_len: usize) -> BTreeSet<(bool, usize)> {
    let src_used: BTreeSet<usize> = pairs.iter().map(|p| p.0).collect();
    let tgt_used: BTreeSet<usize> = pairs.iter().map(|p| p.1).collect();
    (0..src_len)
        .filter(|i| !src_used.contains(i))
        .map(|i| (false, i))
        .chain((0..tgt_len).filter(|j| !tgt_used.contains(j)).map(|j| (true, j)))
        .collect()
}

pub fn unmatch_counts<T: Scalar>(gold: &GoldAlignment, predicted: &AlignmentResult<T>) -> Result<Counts, EvalError> {
    check_pair(gold, predicted)?;
    let (n, m) = (predicted.src_len(), predicted.tgt_len());
    let u_p = unaligned(&predicted.row_pairs(), n, m);
    let u_g = unaligned(&gold.pairs.iter().copied().collect(), n, m);
    Ok(Counts { predicted: u_p.len(), gold: u_g.len(), hits: u_p.intersection(&u_g).count() })
}

/// Precision and recall of predicted pairs against gold pairs. Merged pairs
/// count once per target row.
pub fn match_score<S: MetricScalar, T: Scalar>(gold: &GoldAlignment, predicted: &AlignmentResult<T>) -> Result<MatchScore<S>, EvalError> {
    Ok(match_counts(gold, predicted)?.score())
}

/// Precision and recall of rows left unaligned, over both tables.
pub fn unmatch_score<S: MetricScalar, T: Scalar>(gold: &GoldAlignment, predicted: &AlignmentResult<T>) -> Result<MatchScore<S>, EvalError> {
    Ok(unmatch_counts(gold, predicted)?.score())
}

/// Gold annotations the prediction got wrong, per challenge label. A labelled
/// pair counts when it is missing from the prediction; a labelled single row
/// counts when the prediction aligned it anyway. Every label on a target
/// counts.
pub fn error_breakdown<T: Scalar>(gold: &GoldAlignment, predicted: &AlignmentResult<T>) -> Result<BTreeMap<ChallengeLabel, usize>, EvalError> {
    check_pair(gold, predicted)?;
    let p = predicted.row_pairs();
    let mut out: BTreeMap<ChallengeLabel, usize> = ChallengeLabel::ALL.iter().map(|l| (*l, 0)).collect();
    for (target, labels) in &gold.labels {
        let missed = match *target {
            LabelTarget::Pair(i, j) => !p.contains(&(i, j)),
            LabelTarget::SrcOnly(i) => predicted.pair_for_src(i).is_some(),
            LabelTarget::TgtOnly(j) => predicted.pair_for_tgt(j).is_some(),
        };
        if missed {
            for l in labels {
                *out.entry(*l).or_default() += 1;
            }
        }
    }
    Ok(out)
}
