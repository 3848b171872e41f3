//! Cross-language infobox synchronization: corpus model, translation and
//! embedding providers, the five-stage row aligner, evaluation and
//! threshold tuning, and the rule engine that proposes edits.
//!
//! Numeric code is generic over [`scalar::Scalar`]; the aliases below fix
//! it to `f64`, which is what the CLI and service use.

pub mod alignment;
pub mod corpus;
pub mod eval;
pub mod fixtures;
pub mod providers;
pub mod scalar;
pub mod update;

use num_rational::Rational64;

pub type ThresholdSet = alignment::ThresholdSet<f64>;
pub type AlignmentPair = alignment::AlignmentPair<f64>;
pub type AlignmentResult = alignment::AlignmentResult<f64>;
pub type Aligner<'a> = alignment::Aligner<'a, f64>;
pub type RuleEngine<'a> = update::RuleEngine<'a, f64>;
pub type EmbeddingVector = providers::EmbeddingVector<f64>;
pub type TuneOutcome = eval::TuneOutcome<f64>;
pub type MatchScore = eval::MatchScore<f64>;
/// Metric scores computed without rounding.
pub type ExactScore = eval::MatchScore<Rational64>;
