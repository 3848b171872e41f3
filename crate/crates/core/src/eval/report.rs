use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::alignment::{AlignmentResult, PairId};
use crate::corpus::{Category, ChallengeLabel, GoldAlignment};
use crate::scalar::Scalar;

use super::{error_breakdown, match_counts, unmatch_counts, Counts, EvalError, MatchScore};

/// Key-frequency band used for grouping evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum KeyTier {
    High,
    Mid,
    Low,
}

impl KeyTier {
    /// Above 100 is High, 50 through 100 is Mid, below 50 is Low.
    pub fn from_frequency(n: usize) -> KeyTier {
        if n > 100 {
            KeyTier::High
        } else if n >= 50 {
            KeyTier::Mid
        } else {
            KeyTier::Low
        }
    }
}

impl fmt::Display for KeyTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KeyTier::High => "High",
            KeyTier::Mid => "Mid",
            KeyTier::Low => "Low",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub pairs: usize,
    pub matched: Counts,
    pub unmatched: Counts,
    /// Distinct source rows in some predicted pair.
    pub covered: usize,
    /// Rows in the smaller table.
    pub coverage_base: usize,
    pub errors: BTreeMap<ChallengeLabel, usize>,
}

impl Tally {
    fn absorb(&mut self, o: &Tally) {
        self.pairs += o.pairs;
        self.matched += o.matched;
        self.unmatched += o.unmatched;
        self.covered += o.covered;
        self.coverage_base += o.coverage_base;
        for (l, n) in &o.errors {
            *self.errors.entry(*l).or_default() += n;
        }
    }

    pub fn coverage(&self) -> f64 {
        if self.coverage_base == 0 {
            0.0
        } else {
            self.covered as f64 / self.coverage_base as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEvaluation {
    pub pair: PairId,
    pub category: Category,
    pub total: Tally,
    pub by_tier: BTreeMap<KeyTier, Tally>,
}

/// Scores one predicted alignment. `tiers` gives the key tier of every
/// source and target row; without it the tier breakdown is empty.
pub fn evaluate_pair<T: Scalar>(
    gold: &GoldAlignment,
    predicted: &AlignmentResult<T>,
    category: Category,
    tiers: Option<(&[KeyTier], &[KeyTier])>,
) -> Result<PairEvaluation, EvalError> {
    let (n, m) = (predicted.src_len(), predicted.tgt_len());
    let errors = if gold.labels.is_empty() { BTreeMap::new() } else { error_breakdown(gold, predicted)? };
    let total = Tally {
        pairs: 1,
        matched: match_counts(gold, predicted)?,
        unmatched: unmatch_counts(gold, predicted)?,
        covered: predicted.pairs.len(),
        coverage_base: n.min(m),
        errors,
    };

    let mut by_tier = BTreeMap::new();
    if let Some((src_t, tgt_t)) = tiers {
        if src_t.len() != n || tgt_t.len() != m {
            return Err(EvalError::InvalidGold {
                pair: predicted.pair.to_string(),
                reason: format!("tier lists cover {}x{} rows, tables have {n}x{m}", src_t.len(), tgt_t.len()),
            });
        }
        let p = predicted.row_pairs();
        let g: std::collections::BTreeSet<(usize, usize)> = gold.pairs.iter().copied().collect();
        for tier in [KeyTier::High, KeyTier::Mid, KeyTier::Low] {
            let in_tier = |(i, _): &(usize, usize)| src_t[*i] == tier;
            let src_rows = (0..n).filter(|&i| src_t[i] == tier);
            let tgt_rows = (0..m).filter(|&j| tgt_t[j] == tier);
            let (src_count, tgt_count) = (src_rows.clone().count(), tgt_rows.clone().count());
            if src_count + tgt_count == 0 {
                continue;
            }
            let matched = Counts {
                predicted: p.iter().filter(|x| in_tier(x)).count(),
                gold: g.iter().filter(|x| in_tier(x)).count(),
                hits: p.intersection(&g).filter(|x| in_tier(x)).count(),
            };
            let free_p = |i: usize, side_tgt: bool| !p.iter().any(|&(a, b)| if side_tgt { b == i } else { a == i });
            let free_g = |i: usize, side_tgt: bool| !g.iter().any(|&(a, b)| if side_tgt { b == i } else { a == i });
            let rows: Vec<(usize, bool)> = src_rows.map(|i| (i, false)).chain(tgt_rows.map(|j| (j, true))).collect();
            let unmatched = Counts {
                predicted: rows.iter().filter(|&&(i, s)| free_p(i, s)).count(),
                gold: rows.iter().filter(|&&(i, s)| free_g(i, s)).count(),
                hits: rows.iter().filter(|&&(i, s)| free_p(i, s) && free_g(i, s)).count(),
            };
            let covered = predicted.pairs.iter().filter(|x| src_t[x.src] == tier).count();
            by_tier.insert(
                tier,
                Tally { pairs: 1, matched, unmatched, covered, coverage_base: src_count.min(tgt_count), errors: BTreeMap::new() },
            );
        }
    }
    Ok(PairEvaluation { pair: predicted.pair.clone(), category, total, by_tier })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    LanguagePair,
    Category,
    KeyTier,
}

impl std::str::FromStr for GroupBy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "language" | "language_pair" | "lang" => Ok(GroupBy::LanguagePair),
            "category" | "domain" => Ok(GroupBy::Category),
            "key_tier" | "tier" | "key" => Ok(GroupBy::KeyTier),
            other => Err(format!("unknown grouping `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub group: String,
    pub pairs: usize,
    pub matched: MatchScore<f64>,
    pub unmatched: MatchScore<f64>,
    pub coverage: f64,
    pub tally: Tally,
}

impl ReportRow {
    fn from_tally(group: String, tally: Tally) -> Self {
        ReportRow {
            group,
            pairs: tally.pairs,
            matched: tally.matched.score(),
            unmatched: tally.unmatched.score(),
            coverage: tally.coverage(),
            tally,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub group_by: GroupBy,
    pub rows: Vec<ReportRow>,
    pub aggregate: ReportRow,
}

/// Micro-averaged scores per group plus an overall row.
pub fn group_report(evaluations: &[PairEvaluation], group_by: GroupBy) -> EvalReport {
    let mut groups: BTreeMap<String, Tally> = BTreeMap::new();
    let mut all = Tally::default();
    for e in evaluations {
        all.absorb(&e.total);
        match group_by {
            GroupBy::LanguagePair => {
                groups.entry(format!("{}-{}", e.pair.src_lang, e.pair.tgt_lang)).or_default().absorb(&e.total);
            }
            GroupBy::Category => groups.entry(e.category.to_string()).or_default().absorb(&e.total),
            GroupBy::KeyTier => {
                for (tier, t) in &e.by_tier {
                    groups.entry(tier.to_string()).or_default().absorb(t);
                }
            }
        }
    }
    let mut rows: Vec<ReportRow> = groups.into_iter().map(|(g, t)| ReportRow::from_tally(g, t)).collect();
    if group_by == GroupBy::KeyTier {
        let rank = |g: &str| ["High", "Mid", "Low"].iter().position(|x| *x == g);
        rows.sort_by_key(|r| rank(&r.group));
    }
    EvalReport { group_by, rows, aggregate: ReportRow::from_tally("all".into(), all) }
}

impl EvalReport {
    /// One line per group, then the aggregate.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![
            "group".to_string(),
            "pairs".into(),
            "match_precision".into(),
            "match_recall".into(),
            "match_f1".into(),
            "unmatch_precision".into(),
            "unmatch_recall".into(),
            "unmatch_f1".into(),
            "coverage".into(),
        ];
        header.extend(ChallengeLabel::ALL.iter().map(|l| format!("err_{l}")));
        w.write_record(&header)?;
        for r in self.rows.iter().chain(std::iter::once(&self.aggregate)) {
            let mut rec = vec![
                r.group.clone(),
                r.pairs.to_string(),
                fmt4(r.matched.precision),
                fmt4(r.matched.recall),
                fmt4(r.matched.f1),
                fmt4(r.unmatched.precision),
                fmt4(r.unmatched.recall),
                fmt4(r.unmatched.f1),
                fmt4(r.coverage),
            ];
            rec.extend(ChallengeLabel::ALL.iter().map(|l| r.tally.errors.get(l).copied().unwrap_or(0).to_string()));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn fmt4(x: f64) -> String {
    format!("{x:.4}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::{AlignmentPair, Module};
    use crate::corpus::LanguageCode;

    fn result(entity: &str, pairs: &[(usize, usize)], n: usize, m: usize) -> AlignmentResult<f64> {
        AlignmentResult {
            pair: PairId { entity_id: entity.into(), src_lang: LanguageCode::En, tgt_lang: LanguageCode::Fr },
            pairs: pairs.iter().map(|&(s, t)| AlignmentPair { src: s, tgt: vec![t], score: 1.0, module: Module::M2 }).collect(),
            unaligned_src: (0..n).filter(|i| !pairs.iter().any(|p| p.0 == *i)).collect(),
            unaligned_tgt: (0..m).filter(|j| !pairs.iter().any(|p| p.1 == *j)).collect(),
        }
    }

    fn eval(entity: &str, cat: Category, gold: &[(usize, usize)], pred: &[(usize, usize)]) -> PairEvaluation {
        let g = GoldAlignment::new(entity, LanguageCode::En, LanguageCode::Fr, gold.to_vec()).unwrap();
        evaluate_pair(&g, &result(entity, pred, 3, 3), cat, None).unwrap()
    }

    #[test]
    fn tier_boundaries() {
        assert_eq!(KeyTier::from_frequency(49), KeyTier::Low);
        assert_eq!(KeyTier::from_frequency(50), KeyTier::Mid);
        assert_eq!(KeyTier::from_frequency(100), KeyTier::Mid);
        assert_eq!(KeyTier::from_frequency(101), KeyTier::High);
    }

    #[test]
    fn single_pair_one_row() {
        let r = group_report(&[eval("A", Category::Album, &[(0, 0)], &[(0, 0)])], GroupBy::Category);
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].group, "Album");
    }

    #[test]
    fn categories_are_micro_averaged() {
        let evals = [
            eval("A", Category::Album, &[(0, 0), (1, 1)], &[(0, 0), (1, 2)]),
            eval("B", Category::Album, &[(0, 0)], &[(0, 0)]),
            eval("C", Category::Airport, &[(0, 0), (1, 1), (2, 2)], &[]),
        ];
        let r = group_report(&evals, GroupBy::Category);
        let names: Vec<_> = r.rows.iter().map(|x| x.group.as_str()).collect();
        assert_eq!(names, ["Airport", "Album"]);
        // Album: 2 hits of 3 predicted and 3 gold.
        let album = &r.rows[1];
        assert_eq!(album.tally.matched, Counts { predicted: 3, gold: 3, hits: 2 });
        assert!((album.matched.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.rows[0].matched.f1, 0.0);
        assert_eq!(r.aggregate.tally.matched, Counts { predicted: 3, gold: 6, hits: 2 });
        assert_eq!(r.aggregate.tally.covered, 3);
        assert_eq!(r.aggregate.tally.coverage_base, 9);
    }

    #[test]
    fn tier_grouping_splits_rows() {
        let g = GoldAlignment::new("A", LanguageCode::En, LanguageCode::Fr, vec![(0, 0), (1, 1)]).unwrap();
        let tiers_s = [KeyTier::High, KeyTier::Low, KeyTier::Low];
        let tiers_t = [KeyTier::High, KeyTier::Low, KeyTier::Mid];
        let e = evaluate_pair(&g, &result("A", &[(0, 0), (2, 1)], 3, 3), Category::Album, Some((&tiers_s, &tiers_t))).unwrap();
        assert_eq!(e.by_tier[&KeyTier::High].matched, Counts { predicted: 1, gold: 1, hits: 1 });
        assert_eq!(e.by_tier[&KeyTier::Low].matched, Counts { predicted: 1, gold: 1, hits: 0 });
        // Low rows: src 1, src 2, tgt 1. Predicted free: src 1. Gold free: src 2.
        assert_eq!(e.by_tier[&KeyTier::Low].unmatched, Counts { predicted: 1, gold: 1, hits: 0 });
        let r = group_report(&[e], GroupBy::KeyTier);
        let names: Vec<_> = r.rows.iter().map(|x| x.group.as_str()).collect();
        assert_eq!(names, ["High", "Mid", "Low"]);
    }

    #[test]
    fn csv_has_one_line_per_group_plus_total() {
        let r = group_report(&[eval("A", Category::Album, &[(0, 0)], &[(0, 0)])], GroupBy::LanguagePair);
        let csv = r.to_csv().unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("group,pairs,match_precision"));
        assert!(lines[1].starts_with("en-fr,1,1.0000,1.0000,1.0000"));
    }
}
