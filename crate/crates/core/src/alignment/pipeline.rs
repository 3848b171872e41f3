use std::cell::RefCell;
use std::collections::HashMap;

use rayon::prelude::*;

use crate::corpus::{Infobox, LanguageCode};
use crate::providers::{cosine, translate_table, Embedder, EmbeddingVector, KeyTranslationMap, ProviderError, Translator};
use crate::scalar::Scalar;

use super::matching::{greedy_mutual_match, one_way_best_match, Match, SimilarityMatrix};
use super::{AlignError, AlignmentPair, AlignmentResult, Module, ModuleSet, PairClass, PairId, ThresholdSet};

/// Runs the alignment stages over a table pair.
pub struct Aligner<'a, T: Scalar> {
    translator: &'a dyn Translator,
    embedder: &'a dyn Embedder<T>,
    vote_map: Option<&'a KeyTranslationMap>,
    thresholds: ThresholdSet<T>,
    modules: ModuleSet,
}

impl<'a, T: Scalar> Aligner<'a, T> {
    pub fn new(translator: &'a dyn Translator, embedder: &'a dyn Embedder<T>) -> Self {
        Aligner { translator, embedder, vote_map: None, thresholds: ThresholdSet::default(), modules: ModuleSet::all() }
    }

    pub fn with_vote_map(mut self, vote_map: &'a KeyTranslationMap) -> Self {
        self.vote_map = Some(vote_map);
        self
    }

    pub fn with_thresholds(mut self, thresholds: ThresholdSet<T>) -> Self {
        self.thresholds = thresholds;
        self
    }

    pub fn with_modules(mut self, modules: ModuleSet) -> Self {
        self.modules = modules;
        self
    }

    pub fn thresholds(&self) -> &ThresholdSet<T> {
        &self.thresholds
    }

    pub fn modules(&self) -> &ModuleSet {
        &self.modules
    }

    pub fn translator(&self) -> &'a dyn Translator {
        self.translator
    }

    pub fn embedder(&self) -> &'a dyn Embedder<T> {
        self.embedder
    }

    pub fn vote_map(&self) -> Option<&'a KeyTranslationMap> {
        self.vote_map
    }

    /// Aligns the rows of `src` against the rows of `tgt`.
    pub fn align(&self, src: &Infobox, tgt: &Infobox) -> Result<AlignmentResult<T>, AlignError> {
        self.thresholds.validate()?;
        let class = PairClass::of(src.language, tgt.language);
        let theta = |m: Module| self.thresholds.get(class, m);
        let mut state = State::new(src.len(), tgt.len());
        let memo = EmbedMemo::new(self.embedder);

        if self.modules.contains(Module::M1) {
            let src_keys = self.voted_keys(src);
            let tgt_keys = self.voted_keys(tgt);
            let rows_s: Vec<usize> = state.free_src().into_iter().filter(|&i| src_keys[i].is_some()).collect();
            let rows_t: Vec<usize> = state.free_tgt().into_iter().filter(|&j| tgt_keys[j].is_some()).collect();
            let sim = SimilarityMatrix::from_fn(rows_s, rows_t, |i, j| {
                memo.similarity(src_keys[i].as_deref().unwrap(), tgt_keys[j].as_deref().unwrap())
            })
            .map_err(stage(Module::M1))?;
            state.accept(greedy_mutual_match(&sim, theta(Module::M1)), Module::M1);
        }

        let later = [Module::M2, Module::M3, Module::M4, Module::M5];
        if !later.iter().any(|m| self.modules.contains(*m)) {
            return Ok(state.finish(pair_id(src, tgt)));
        }
        let src_en = translate_table(src, LanguageCode::En, None, self.translator)?;
        let tgt_en = translate_table(tgt, LanguageCode::En, None, self.translator)?;

        if self.modules.contains(Module::M2) {
            let sim = SimilarityMatrix::from_fn(state.free_src(), state.free_tgt(), |i, j| {
                memo.similarity(&src_en.rows[i].key, &tgt_en.rows[j].key)
            })
            .map_err(stage(Module::M2))?;
            state.accept(greedy_mutual_match(&sim, theta(Module::M2)), Module::M2);
        }

        if self.modules.contains(Module::M3) {
            let sim = SimilarityMatrix::from_fn(state.free_src(), state.free_tgt(), |i, j| {
                memo.similarity(&src_en.rows[i].text(), &tgt_en.rows[j].text())
            })
            .map_err(stage(Module::M3))?;
            state.accept(greedy_mutual_match(&sim, theta(Module::M3)), Module::M3);
        }

        if self.modules.contains(Module::M4) {
            let sim = SimilarityMatrix::from_fn(state.free_src(), state.free_tgt(), |i, j| {
                memo.similarity(&src_en.rows[i].text(), &tgt_en.rows[j].text())
            })
            .map_err(stage(Module::M4))?;
            state.accept(one_way_best_match(&sim, theta(Module::M4)), Module::M4);
        }

        if self.modules.contains(Module::M5) {
            self.multi_key(&mut state, &src_en, &tgt_en, theta(Module::M5), &memo).map_err(stage(Module::M5))?;
        }

        Ok(state.finish(pair_id(src, tgt)))
    }

    /// English key per row as used by `M1`: the key itself for English
    /// tables, the voted translation otherwise.
    fn voted_keys(&self, table: &Infobox) -> Vec<Option<String>> {
        table
            .rows
            .iter()
            .map(|r| {
                if table.language.is_english() {
                    Some(r.key.clone())
                } else {
                    self.vote_map.and_then(|m| m.lookup(table.language, table.category, &r.key)).map(str::to_string)
                }
            })
            .collect()
    }

    /// One source row against its two most key-similar eligible target rows.
    /// Targets are eligible when unaligned or already paired one-to-one with
    /// that source row, which the merged pair then replaces.
    fn multi_key(
        &self,
        state: &mut State<T>,
        src_en: &Infobox,
        tgt_en: &Infobox,
        theta: T,
        memo: &EmbedMemo<'_, T>,
    ) -> Result<(), ProviderError> {
        struct Candidate<T> {
            src: usize,
            tgt: [usize; 2],
            score: T,
        }

        let free_tgt = state.free_tgt();
        let mut candidates = Vec::new();
        for s in 0..src_en.len() {
            let current = match state.src_of[s] {
                None => None,
                Some(p) => {
                    let pair = state.pairs[p].as_ref().expect("live pair");
                    if pair.module == Module::M5 {
                        continue;
                    }
                    Some(pair.tgt[0])
                }
            };
            let mut eligible: Vec<usize> = free_tgt.clone();
            eligible.extend(current);
            eligible.sort_unstable();
            if eligible.len() < 2 {
                continue;
            }
            let mut scored = eligible
                .into_iter()
                .map(|t| Ok((t, memo.similarity(&src_en.rows[s].key, &tgt_en.rows[t].key)?)))
                .collect::<Result<Vec<(usize, T)>, ProviderError>>()?;
            scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
            let (first, second) = (scored[0], scored[1]);
            if !(first.1 > theta && second.1 > theta) {
                continue;
            }
            if let Some(c) = current {
                if c != first.0 && c != second.0 {
                    continue;
                }
            }
            let mut tgt = [first.0, second.0];
            tgt.sort_unstable();
            let src_text = src_en.rows[s].text();
            let merged = format!("{} {}", tgt_en.rows[tgt[0]].values_text(), tgt_en.rows[tgt[1]].values_text());
            let single = memo
                .similarity(&src_text, &tgt_en.rows[tgt[0]].values_text())?
                .max(memo.similarity(&src_text, &tgt_en.rows[tgt[1]].values_text())?);
            if memo.similarity(&src_text, &merged)? > single {
                candidates.push(Candidate { src: s, tgt, score: second.1.min(first.1) });
            }
        }

        candidates.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal).then(a.src.cmp(&b.src)));
        for c in candidates {
            let claimable = |t: usize| match state.tgt_of[t] {
                None => true,
                Some(p) => state.pairs[p].as_ref().is_some_and(|pair| pair.src == c.src && pair.module != Module::M5),
            };
            if claimable(c.tgt[0]) && claimable(c.tgt[1]) {
                state.replace_with_multi(c.src, c.tgt, c.score);
            }
        }
        Ok(())
    }
}

fn pair_id(src: &Infobox, tgt: &Infobox) -> PairId {
    PairId { entity_id: src.entity_id.clone(), src_lang: src.language, tgt_lang: tgt.language }
}

fn stage(module: Module) -> impl Fn(ProviderError) -> AlignError {
    move |source| AlignError::Stage { module, source }
}

struct EmbedMemo<'a, T: Scalar> {
    embedder: &'a dyn Embedder<T>,
    seen: RefCell<HashMap<String, EmbeddingVector<T>>>,
}

impl<'a, T: Scalar> EmbedMemo<'a, T> {
    fn new(embedder: &'a dyn Embedder<T>) -> Self {
        EmbedMemo { embedder, seen: RefCell::new(HashMap::new()) }
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector<T>, ProviderError> {
        if let Some(v) = self.seen.borrow().get(text) {
            return Ok(v.clone());
        }
        let v = self.embedder.embed(text)?;
        self.seen.borrow_mut().insert(text.to_string(), v.clone());
        Ok(v)
    }

    fn similarity(&self, a: &str, b: &str) -> Result<T, ProviderError> {
        cosine(&self.embed(a)?, &self.embed(b)?)
    }
}

struct State<T: Scalar> {
    pairs: Vec<Option<AlignmentPair<T>>>,
    src_of: Vec<Option<usize>>,
    tgt_of: Vec<Option<usize>>,
}

impl<T: Scalar> State<T> {
    fn new(n: usize, m: usize) -> Self {
        State { pairs: Vec::new(), src_of: vec![None; n], tgt_of: vec![None; m] }
    }

    fn free_src(&self) -> Vec<usize> {
        (0..self.src_of.len()).filter(|&i| self.src_of[i].is_none()).collect()
    }

    fn free_tgt(&self) -> Vec<usize> {
        (0..self.tgt_of.len()).filter(|&j| self.tgt_of[j].is_none()).collect()
    }

    fn accept(&mut self, matches: Vec<Match<T>>, module: Module) {
        for m in matches {
            debug_assert!(self.src_of[m.src].is_none() && self.tgt_of[m.tgt].is_none());
            let idx = self.pairs.len();
            self.pairs.push(Some(AlignmentPair { src: m.src, tgt: vec![m.tgt], score: m.score, module }));
            self.src_of[m.src] = Some(idx);
            self.tgt_of[m.tgt] = Some(idx);
        }
    }

    fn replace_with_multi(&mut self, src: usize, tgt: [usize; 2], score: T) {
        if let Some(old) = self.src_of[src].take() {
            if let Some(pair) = self.pairs[old].take() {
                for t in pair.tgt {
                    self.tgt_of[t] = None;
                }
            }
        }
        let idx = self.pairs.len();
        self.pairs.push(Some(AlignmentPair { src, tgt: tgt.to_vec(), score, module: Module::M5 }));
        self.src_of[src] = Some(idx);
        for t in tgt {
            self.tgt_of[t] = Some(idx);
        }
    }

    fn finish(self, pair: PairId) -> AlignmentResult<T> {
        let unaligned_src = self.free_src();
        let unaligned_tgt = self.free_tgt();
        let mut pairs: Vec<_> = self.pairs.into_iter().flatten().collect();
        pairs.sort_by_key(|p| p.src);
        AlignmentResult { pair, pairs, unaligned_src, unaligned_tgt }
    }
}

/// Aligns many table pairs on a pool of `jobs` threads. Output order follows
/// input order regardless of scheduling.
pub fn align_many<T: Scalar>(
    aligner: &Aligner<'_, T>,
    pairs: &[(&Infobox, &Infobox)],
    jobs: usize,
) -> Vec<Result<AlignmentResult<T>, AlignError>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool");
    pool.install(|| pairs.par_iter().map(|(s, t)| aligner.align(s, t)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Category;
    use crate::fixtures::{planted_stage, table};
    use crate::providers::{DictionaryTranslator, HashedBowEmbedder, IdentityTranslator, TableEmbedder};

    fn summary(r: &AlignmentResult<f64>) -> Vec<(usize, Vec<usize>, Module)> {
        r.pairs.iter().map(|p| (p.src, p.tgt.clone(), p.module)).collect()
    }

    #[test]
    fn identical_tables_align_at_m1() {
        let t = table("E1", LanguageCode::En, Category::Person, &[("Born", &["1900"]), ("Died", &["1950"])]);
        let emb = HashedBowEmbedder::default();
        let r = Aligner::<f64>::new(&IdentityTranslator, &emb).align(&t, &t).unwrap();
        assert_eq!(summary(&r), vec![(0, vec![0], Module::M1), (1, vec![1], Module::M1)]);
        assert!(r.pairs.iter().all(|p| p.score == 1.0));
    }

    #[test]
    fn swapped_keys_cross_align() {
        let a = table("E1", LanguageCode::En, Category::Person, &[("Born", &["x"]), ("Died", &["y"])]);
        let b = table("E1", LanguageCode::En, Category::Person, &[("Died", &["y"]), ("Born", &["x"])]);
        let emb = HashedBowEmbedder::default();
        let r = Aligner::<f64>::new(&IdentityTranslator, &emb).align(&a, &b).unwrap();
        assert_eq!(r.row_pairs().into_iter().collect::<Vec<_>>(), vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn key_missing_from_vote_map_waits_for_m2() {
        let a = table("E1", LanguageCode::Hi, Category::Person, &[("जन्म", &["1900"])]);
        let b = table("E1", LanguageCode::En, Category::Person, &[("Born", &["1900"])]);
        let tr = DictionaryTranslator::new().passthrough().with(LanguageCode::Hi, LanguageCode::En, "जन्म", "Born");
        let emb = HashedBowEmbedder::default();
        let r = Aligner::<f64>::new(&tr, &emb).with_vote_map(&KeyTranslationMap::new()).align(&a, &b).unwrap();
        assert_eq!(summary(&r), vec![(0, vec![0], Module::M2)]);
    }

    #[test]
    fn m2_uses_embedding_score() {
        let a = table("E1", LanguageCode::En, Category::Person, &[("Spouse", &["Mileva"])]);
        let b = table("E1", LanguageCode::En, Category::Person, &[("Spouse(s)", &["Elsa"])]);
        let emb = TableEmbedder::<f64>::new()
            .with("Spouse", vec![1.0, 0.0])
            .with("Spouse(s)", vec![0.9, (1.0f64 - 0.81).sqrt()])
            .with_fallback(HashedBowEmbedder::new(2));
        let only = |m| ModuleSet::only([m]);
        let r = Aligner::new(&IdentityTranslator, &emb).with_modules(only(Module::M2)).align(&a, &b).unwrap();
        assert_eq!(r.pairs.len(), 1);
        assert!((r.pairs[0].score - 0.9).abs() < 1e-12);

        let mut th = ThresholdSet::default();
        th.set(PairClass::EnglishInvolved, Module::M2, 0.95);
        let r = Aligner::new(&IdentityTranslator, &emb).with_modules(only(Module::M2)).with_thresholds(th).align(&a, &b).unwrap();
        assert!(r.pairs.is_empty());
    }

    #[test]
    fn m3_aligns_on_shared_values() {
        let a = table("E1", LanguageCode::En, Category::Person, &[("Known for", &["general relativity photoelectric effect"])]);
        let b = table("E1", LanguageCode::En, Category::Person, &[("Major achievements", &["general relativity photoelectric effect"])]);
        let emb = HashedBowEmbedder::default();
        // 4 shared tokens out of 6 on each side: 4/6.
        let r = Aligner::<f64>::new(&IdentityTranslator, &emb).align(&a, &b).unwrap();
        assert_eq!(summary(&r), vec![(0, vec![0], Module::M3)]);
        assert!((r.pairs[0].score - 4.0 / 6.0).abs() < 1e-12);

        let c = table("E1", LanguageCode::En, Category::Person, &[("Colour of", &["the sky"])]);
        let d = table("E1", LanguageCode::En, Category::Person, &[("Size of", &["the moon"])]);
        // "of" and "the" shared: 2/4 = 0.5, below 0.54.
        let r = Aligner::<f64>::new(&IdentityTranslator, &emb).align(&c, &d).unwrap();
        assert!(r.pairs.is_empty());
    }

    fn parents_embedder(merged: Vec<f64>) -> TableEmbedder<f64> {
        let side = 0.312_249_899_919_871_9;
        TableEmbedder::new()
            .with("Parents", vec![1.0, 0.0, 0.0, 0.0])
            .with("Father", vec![0.95, side, 0.0, 0.0])
            .with("Mother", vec![0.95, 0.0, side, 0.0])
            .with("Parents A B", vec![0.0, 0.0, 0.0, 1.0])
            .with("A", vec![0.0, 0.0, 0.6, 0.8])
            .with("B", vec![0.0, 0.6, 0.0, 0.8])
            .with("A B", merged)
    }

    #[test]
    fn m5_merges_parent_rows() {
        let a = table("E1", LanguageCode::En, Category::Person, &[("Parents", &["A", "B"])]);
        let b = table("E1", LanguageCode::En, Category::Person, &[("Father", &["A"]), ("Mother", &["B"])]);
        let emb = parents_embedder(vec![0.0, 0.0, 0.0, 1.0]);
        let r = Aligner::new(&IdentityTranslator, &emb).with_modules(ModuleSet::only([Module::M5])).align(&a, &b).unwrap();
        assert_eq!(summary(&r), vec![(0, vec![0, 1], Module::M5)]);
        assert!((r.pairs[0].score - 0.95).abs() < 1e-12);

        // The merged pair replaces an earlier one-to-one pair on the same source row.
        let r = Aligner::new(&IdentityTranslator, &emb).with_modules(ModuleSet::only([Module::M1, Module::M5])).align(&a, &b).unwrap();
        assert_eq!(summary(&r), vec![(0, vec![0, 1], Module::M5)]);
    }

    #[test]
    fn m5_needs_merged_values_to_beat_single() {
        let a = table("E1", LanguageCode::En, Category::Person, &[("Parents", &["A", "B"])]);
        let b = table("E1", LanguageCode::En, Category::Person, &[("Father", &["A"]), ("Mother", &["B"])]);
        let emb = parents_embedder(vec![0.0, 0.8, 0.0, 0.6]);
        let r = Aligner::new(&IdentityTranslator, &emb).with_modules(ModuleSet::only([Module::M1, Module::M5])).align(&a, &b).unwrap();
        assert_eq!(summary(&r), vec![(0, vec![0], Module::M1)]);
    }

    #[test]
    fn m5_considers_top_two_keys_only() {
        let a = table("E1", LanguageCode::En, Category::Person, &[("Parents", &["A", "B"])]);
        let b = table("E1", LanguageCode::En, Category::Person, &[("Father", &["A"]), ("Guardian", &["C"]), ("Mother", &["B"])]);
        let emb = parents_embedder(vec![0.0, 0.0, 0.0, 1.0]).with("Guardian", vec![0.9, 0.0, 0.0, (1.0f64 - 0.81).sqrt()]);
        let r = Aligner::new(&IdentityTranslator, &emb).with_modules(ModuleSet::only([Module::M5])).align(&a, &b).unwrap();
        assert_eq!(summary(&r), vec![(0, vec![0, 2], Module::M5)]);
    }

    #[test]
    fn planted_fixture_attributes_each_stage() {
        let f = planted_stage::<f64>();
        let emb = HashedBowEmbedder::default();
        let aligner = Aligner::new(&f.translator, &emb).with_vote_map(&f.vote_map).with_thresholds(f.thresholds);
        let r = aligner.align(&f.src, &f.tgt).unwrap();
        assert_eq!(summary(&r), f.expected);
        assert_eq!(r.unaligned_src, vec![5]);
        assert!(r.unaligned_tgt.is_empty());
        r.validate(6, 6).unwrap();
    }

    #[test]
    fn align_many_preserves_order() {
        let f = planted_stage::<f64>();
        let emb = HashedBowEmbedder::default();
        let aligner = Aligner::new(&f.translator, &emb).with_vote_map(&f.vote_map).with_thresholds(f.thresholds);
        let pairs = vec![(&f.src, &f.tgt), (&f.tgt, &f.src), (&f.src, &f.src)];
        let one = align_many(&aligner, &pairs, 1);
        let eight = align_many(&aligner, &pairs, 8);
        let one: Vec<_> = one.into_iter().map(Result::unwrap).collect();
        let eight: Vec<_> = eight.into_iter().map(Result::unwrap).collect();
        assert_eq!(one, eight);
        assert_eq!(one[0].pair.src_lang, LanguageCode::De);
        assert_eq!(one[1].pair.src_lang, LanguageCode::En);
    }
}
