use std::collections::BTreeSet;

use num_rational::Rational64;
use proptest::prelude::*;
use tabsync_core::alignment::{AlignmentPair, AlignmentResult, Aligner, Module, ModuleSet, PairClass, PairId, ThresholdSet};
use tabsync_core::corpus::{GoldAlignment, LanguageCode, Split};
use tabsync_core::eval::{match_score, tune_thresholds, unmatch_score, GridSpec, MatchScore, ValidationPair};
use tabsync_core::fixtures::tuning_fixture;

/// Materializes every set and scores with plain fractions.
fn oracle(gold: &[(usize, usize)], pred: &[(usize, usize)], n: usize, m: usize) -> (MatchScore<Rational64>, MatchScore<Rational64>) {
    let g: BTreeSet<_> = gold.iter().copied().collect();
    let p: BTreeSet<_> = pred.iter().copied().collect();
    let score = |hits: usize, np: usize, ng: usize| {
        if np == 0 && ng == 0 {
            let one = Rational64::from_integer(1);
            return MatchScore { precision: one, recall: one, f1: one };
        }
        let frac = |a: usize, b: usize| if b == 0 { Rational64::from_integer(0) } else { Rational64::new(a as i64, b as i64) };
        let (pr, rc) = (frac(hits, np), frac(hits, ng));
        let f1 = if pr + rc == Rational64::from_integer(0) { pr } else { Rational64::from_integer(2) * pr * rc / (pr + rc) };
        MatchScore { precision: pr, recall: rc, f1 }
    };
    let matched = score(p.intersection(&g).count(), p.len(), g.len());
    let rows: Vec<(char, usize)> = (0..n).map(|i| ('x', i)).chain((0..m).map(|j| ('y', j))).collect();
    let free = |s: &BTreeSet<(usize, usize)>, r: &(char, usize)| !s.iter().any(|&(a, b)| if r.0 == 'x' { a == r.1 } else { b == r.1 });
    let u_g: BTreeSet<_> = rows.iter().filter(|r| free(&g, r)).collect();
    let u_p: BTreeSet<_> = rows.iter().filter(|r| free(&p, r)).collect();
    let unmatched = score(u_p.intersection(&u_g).count(), u_p.len(), u_g.len());
    (matched, unmatched)
}

fn one_to_one(n: usize, m: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    (Just(n), Just(m), proptest::collection::vec(any::<bool>(), n * m)).prop_map(|(n, m, mask)| {
        let mut used_t = vec![false; m];
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..m {
                if mask[i * m + j] && !used_t[j] && !out.iter().any(|&(a, _)| a == i) {
                    used_t[j] = true;
                    out.push((i, j));
                }
            }
        }
        out
    })
}

fn case() -> impl Strategy<Value = (usize, usize, Vec<(usize, usize)>, Vec<(usize, usize)>)> {
    (1usize..=8, 1usize..=8).prop_flat_map(|(n, m)| (Just(n), Just(m), one_to_one(n, m), one_to_one(n, m)))
}

fn predicted(pairs: &[(usize, usize)], n: usize, m: usize) -> AlignmentResult<f64> {
    AlignmentResult {
        pair: PairId { entity_id: "E".into(), src_lang: LanguageCode::Ar, tgt_lang: LanguageCode::Zh },
        pairs: pairs.iter().map(|&(s, t)| AlignmentPair { src: s, tgt: vec![t], score: 0.9, module: Module::M3 }).collect(),
        unaligned_src: (0..n).filter(|i| !pairs.iter().any(|p| p.0 == *i)).collect(),
        unaligned_tgt: (0..m).filter(|j| !pairs.iter().any(|p| p.1 == *j)).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn scores_equal_oracle((n, m, g, p) in case()) {
        let gold = GoldAlignment::new("E", LanguageCode::Ar, LanguageCode::Zh, g.clone()).unwrap();
        let pred = predicted(&p, n, m);
        let (om, ou) = oracle(&g, &p, n, m);
        prop_assert_eq!(match_score::<Rational64, _>(&gold, &pred).unwrap(), om);
        prop_assert_eq!(unmatch_score::<Rational64, _>(&gold, &pred).unwrap(), ou);
        let f = match_score::<f64, _>(&gold, &pred).unwrap();
        prop_assert!((0.0..=1.0).contains(&f.f1));
        prop_assert!(f.f1 <= (2.0 * f.precision.min(f.recall)).min(1.0) + 1e-12);
    }

    #[test]
    fn match_score_is_mirror_symmetric((n, m, g, p) in case()) {
        let gold = GoldAlignment::new("E", LanguageCode::Ar, LanguageCode::Zh, g).unwrap();
        let pred = predicted(&p, n, m);
        let a = match_score::<Rational64, _>(&gold, &pred).unwrap();
        let b = match_score::<Rational64, _>(&gold.mirrored(), &pred.mirrored().unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }
}

fn tune(entities: &[(&[f64], &[f64])], grid: GridSpec) -> f64 {
    let f = tuning_fixture::<f64>(entities);
    let aligner = Aligner::new(&f.translator, &f.embedder).with_vote_map(&f.vote_map).with_modules(ModuleSet::only([Module::M1]));
    let pairs: Vec<_> = f.pairs.iter().map(|(s, t, g)| ValidationPair { src: s, tgt: t, gold: g }).collect();
    let out = tune_thresholds(&aligner, &pairs, &grid, PairClass::EnglishInvolved).unwrap();
    out.thresholds.get(PairClass::EnglishInvolved, Module::M1)
}

#[test]
fn tuning_recovers_planted_gap() {
    let entities: &[(&[f64], &[f64])] = &[(&[0.72, 0.9], &[0.6]), (&[0.95, 0.8, 0.75], &[0.65, 0.5]), (&[0.71], &[0.62])];
    let theta = tune(entities, GridSpec::new(0.4, 1.0, 0.05));
    assert!(theta > 0.65 && theta <= 0.7, "{theta}");
}

#[test]
fn flat_fixture_picks_grid_maximum() {
    let entities: &[(&[f64], &[f64])] = &[(&[], &[0.0, 0.1]), (&[], &[0.2])];
    assert_eq!(tune(entities, GridSpec::default()), 1.0);
    assert_eq!(tune(entities, GridSpec::new(0.3, 0.5, 0.7)), 0.3);
}

#[test]
fn tuning_ignores_test_split_and_other_class() {
    let f = tuning_fixture::<f64>(&[(&[0.9], &[0.6])]);
    let aligner = Aligner::new(&f.translator, &f.embedder).with_vote_map(&f.vote_map).with_modules(ModuleSet::only([Module::M1]));
    let (s, t, g) = &f.pairs[0];
    let test_gold = g.clone().with_split(Split::Test);
    let pairs = [ValidationPair { src: s, tgt: t, gold: &test_gold }];
    assert!(tune_thresholds(&aligner, &pairs, &GridSpec::default(), PairClass::EnglishInvolved).is_err());
    let pairs = [ValidationPair { src: s, tgt: t, gold: g }];
    assert!(tune_thresholds(&aligner, &pairs, &GridSpec::default(), PairClass::NonEnglish).is_err());
    let out = tune_thresholds(&aligner, &pairs, &GridSpec::default(), PairClass::EnglishInvolved).unwrap();
    // Non-English thresholds stay at their defaults.
    assert_eq!(out.thresholds.class(PairClass::NonEnglish), ThresholdSet::<f64>::default().class(PairClass::NonEnglish));
    let again = tune_thresholds(&aligner, &pairs, &GridSpec::default(), PairClass::EnglishInvolved).unwrap();
    assert_eq!(out, again);
    let grid = GridSpec::default().values().unwrap();
    assert!(grid.contains(&out.thresholds.get(PairClass::EnglishInvolved, Module::M1)));
}
