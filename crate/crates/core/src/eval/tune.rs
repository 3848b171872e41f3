use num_rational::Rational64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{Aligner, Module, ModuleSet, PairClass, ThresholdSet};
use crate::corpus::{GoldAlignment, Infobox, Split};
use crate::scalar::{MetricScalar, Scalar};

use super::{match_counts, Counts, EvalError, MatchScore};

/// Inclusive sweep `start, start + step, ...` up to `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { start: 0.40, stop: 1.00, step: 0.02 }
    }
}

impl GridSpec {
    pub fn new(start: f64, stop: f64, step: f64) -> Self {
        GridSpec { start, stop, step }
    }

    /// Grid points snapped to 1e-9 so that accumulated step error does not
    /// produce values like 0.7000000000000001.
    pub fn values(&self) -> Result<Vec<f64>, EvalError> {
        let ok = |x: f64| x.is_finite() && (0.0..=1.0).contains(&x);
        if !ok(self.start) || !ok(self.stop) || self.start > self.stop {
            return Err(EvalError::InvalidGrid(format!("range {}..{} must lie in [0, 1]", self.start, self.stop)));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(EvalError::InvalidGrid(format!("step {} must be positive", self.step)));
        }
        let snap = |x: f64| (x * 1e9).round() / 1e9;
        let mut out = Vec::new();
        let mut k = 0u32;
        loop {
            let v = snap(self.start + f64::from(k) * self.step);
            if v > self.stop + 1e-9 {
                break;
            }
            out.push(v.min(1.0));
            k += 1;
        }
        Ok(out)
    }
}

/// A table pair with its manual alignment.
#[derive(Debug, Clone, Copy)]
pub struct ValidationPair<'a> {
    pub src: &'a Infobox,
    pub tgt: &'a Infobox,
    pub gold: &'a GoldAlignment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub module: Module,
    /// `(theta, matched f1)` per grid point.
    pub sweep: Vec<(f64, f64)>,
    pub chosen: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct TuneOutcome<T: Scalar> {
    pub thresholds: ThresholdSet<T>,
    pub class: PairClass,
    pub pairs_used: usize,
    pub trace: Vec<StageTrace>,
}

fn oriented(pair: &ValidationPair<'_>) -> GoldAlignment {
    if pair.gold.lang_a == pair.src.language {
        pair.gold.clone()
    } else {
        pair.gold.mirrored()
    }
}

/// Tunes the thresholds of `class` one stage at a time, in cascade order.
/// For stage `i` the earlier thresholds are fixed at their chosen values
/// and the cascade is cut after stage `i`; the grid point with the highest
/// micro-averaged matched F1 wins, ties going to the larger threshold.
/// Only gold marked as validation is used, and only stages enabled on
/// `aligner` are tuned.
pub fn tune_thresholds<T: Scalar>(
    aligner: &Aligner<'_, T>,
    pairs: &[ValidationPair<'_>],
    grid: &GridSpec,
    class: PairClass,
) -> Result<TuneOutcome<T>, EvalError> {
    let grid = grid.values()?;
    let pairs: Vec<(ValidationPair<'_>, GoldAlignment)> = pairs
        .iter()
        .filter(|p| p.gold.split == Split::Validation && PairClass::of(p.src.language, p.tgt.language) == class)
        .map(|p| (*p, oriented(p)))
        .collect();
    if pairs.is_empty() {
        return Err(EvalError::EmptyValidation);
    }

    let mut thresholds = *aligner.thresholds();
    let mut trace = Vec::new();
    for module in aligner.modules().iter() {
        let upto: Vec<Module> = aligner.modules().iter().filter(|m| *m <= module).collect();
        let stage = ModuleSet::only(upto);
        let sweep = grid
            .par_iter()
            .map(|&theta| {
                let mut th = thresholds;
                th.set(class, module, T::lit(theta));
                let mut a = Aligner::new(aligner.translator(), aligner.embedder()).with_thresholds(th).with_modules(stage.clone());
                if let Some(v) = aligner.vote_map() {
                    a = a.with_vote_map(v);
                }
                let mut total = Counts::default();
                for (p, gold) in &pairs {
                    total += match_counts(gold, &a.align(p.src, p.tgt)?)?;
                }
                Ok((theta, total.score::<Rational64>()))
            })
            .collect::<Result<Vec<(f64, MatchScore<Rational64>)>, EvalError>>()?;

        // Grid is ascending, so `>=` keeps the largest of tied maxima.
        let mut best = 0;
        for (i, (_, s)) in sweep.iter().enumerate() {
            if s.f1 >= sweep[best].1.f1 {
                best = i;
            }
        }
        let chosen = sweep[best].0;
        thresholds.set(class, module, T::lit(chosen));
        trace.push(StageTrace { module, sweep: sweep.iter().map(|(t, s)| (*t, MetricScalar::to_f64(&s.f1))).collect(), chosen });
    }
    Ok(TuneOutcome { thresholds, class, pairs_used: pairs.len(), trace })
}
