use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::alignment::{AlignmentResult, Module};
use crate::corpus::{normalize_key, resource_tier, CorpusStats, Infobox, LanguageCode, Row, Tier};
use crate::providers::{cosine, translate_row, Embedder, ProviderError, Translator};
use crate::scalar::Scalar;

use super::time::{extract_time, parse_numeric};
use super::{DifferenceMode, Direction, EditProposal, Evidence, Rule, Trend, UpdateConfig};

/// A proposal that could not be built, usually because translation failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleFailure {
    pub rule: Rule,
    pub direction: Direction,
    pub src_row: Option<usize>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RuleOutput {
    pub proposals: Vec<EditProposal>,
    pub failures: Vec<RuleFailure>,
}

/// Everything the rules consult besides the tables themselves.
pub struct RuleEngine<'a, T: Scalar> {
    pub config: &'a UpdateConfig,
    pub stats: &'a CorpusStats,
    pub translator: &'a dyn Translator,
    /// When present, embedding similarity joins string inequality in the
    /// "values differ" test, as set by `UpdateConfig::difference_mode`.
    pub embedder: Option<&'a dyn Embedder<T>>,
}

/// One orientation of the table pair.
struct View<'v> {
    src: &'v Infobox,
    tgt: &'v Infobox,
    src_en: &'v [Result<Row, ProviderError>],
    tgt_en: &'v [Result<Row, ProviderError>],
    direction: Direction,
    /// 0 for the alignment's own orientation, 1 for the mirrored one.
    order: u8,
}

#[derive(Clone, Copy)]
struct Aligned {
    /// Source and target rows in the alignment's own orientation.
    a: usize,
    b: usize,
    module: Module,
    score: f64,
}

impl Aligned {
    fn rows(&self, order: u8) -> (usize, usize) {
        if order == 0 {
            (self.a, self.b)
        } else {
            (self.b, self.a)
        }
    }
}

struct Buckets {
    by_rule: BTreeMap<Rule, Vec<((u8, usize, usize), EditProposal)>>,
    failures: Vec<RuleFailure>,
}

impl Buckets {
    fn push(&mut self, view: &View<'_>, sort: usize, p: Result<EditProposal, (Rule, Option<usize>, ProviderError)>) {
        match p {
            Ok(p) => {
                let tie = self.by_rule.get(&p.rule).map_or(0, Vec::len);
                self.by_rule.entry(p.rule).or_default().push(((view.order, sort, tie), p));
            }
            Err((rule, src_row, e)) => {
                self.failures.push(RuleFailure { rule, direction: view.direction, src_row, error: e.to_string() })
            }
        }
    }
}

fn english(table: &Infobox, translator: &dyn Translator) -> Vec<Result<Row, ProviderError>> {
    table
        .rows
        .iter()
        .map(|r| translate_row(r, table.language, LanguageCode::En, table.category, None, translator))
        .collect()
}

fn joined(values: &[String]) -> String {
    normalize_key(&values.join(" | "))
}

fn finish(mut p: EditProposal) -> EditProposal {
    p.id = p.content_id();
    p
}

impl<'a, T: Scalar> RuleEngine<'a, T> {
    pub fn new(config: &'a UpdateConfig, stats: &'a CorpusStats, translator: &'a dyn Translator) -> Self {
        RuleEngine { config, stats, translator, embedder: None }
    }

    pub fn with_embedder(mut self, embedder: &'a dyn Embedder<T>) -> Self {
        self.embedder = Some(embedder);
        self
    }

    /// Runs R1 to R8 on `x` and `y` in both directions. Proposals come out
    /// grouped by rule in priority order; inside a rule the alignment's own
    /// direction comes first, then source-row order. Every aligned pair gets
    /// at most one substitution (the first rule to fire claims it) and at
    /// most one value addition.
    pub fn apply(&self, x: &Infobox, y: &Infobox, alignment: &AlignmentResult<T>) -> RuleOutput {
        let x_en = english(x, self.translator);
        let y_en = english(y, self.translator);
        let views = [
            View { src: x, tgt: y, src_en: &x_en, tgt_en: &y_en, direction: Direction::new(x.language, y.language), order: 0 },
            View { src: y, tgt: x, src_en: &y_en, tgt_en: &x_en, direction: Direction::new(y.language, x.language), order: 1 },
        ];
        let mut out = Buckets { by_rule: BTreeMap::new(), failures: Vec::new() };

        // R1: rows with no counterpart.
        for (view, unaligned) in views.iter().zip([&alignment.unaligned_src, &alignment.unaligned_tgt]) {
            for &s in unaligned {
                out.push(view, s, self.row_transfer(view, s));
            }
        }

        // R2: merged pairs, only meaningful from the single-row side.
        for p in alignment.pairs.iter().filter(|p| p.tgt.len() == 2) {
            out.push(&views[0], p.src, self.multi_match(&views[0], p.src, [p.tgt[0], p.tgt[1]]));
        }

        let one_to_one: Vec<Aligned> = alignment
            .pairs
            .iter()
            .filter(|p| p.tgt.len() == 1)
            .map(|p| Aligned { a: p.src, b: p.tgt[0], module: p.module, score: p.score.to_f64().unwrap_or(f64::NAN) })
            .collect();

        // R3, R4, R6, R7, R8: first rule to fire claims the pair.
        let mut claimed: BTreeMap<(usize, usize), (Rule, u8)> = BTreeMap::new();
        for pair in &one_to_one {
            'rules: for rule in [Rule::R3, Rule::R4, Rule::R6, Rule::R7, Rule::R8] {
                for view in &views {
                    let (s, t) = pair.rows(view.order);
                    if let Some(result) = self.substitute(view, rule, s, t, pair) {
                        claimed.insert((pair.a, pair.b), (rule, view.order));
                        out.push(view, s, result);
                        break 'rules;
                    }
                }
            }
        }

        // R5: skipped after R3/R4, and when a substitution flows the other
        // way, since that overwrites the very list being appended from.
        for view in &views {
            for pair in &one_to_one {
                match claimed.get(&(pair.a, pair.b)) {
                    Some((Rule::R3 | Rule::R4, _)) => continue,
                    Some((_, order)) if *order != view.order => continue,
                    _ => {}
                }
                let (s, t) = pair.rows(view.order);
                if let Some(result) = self.append_value(view, s, t, pair) {
                    out.push(view, s, result);
                }
            }
        }

        let mut proposals = Vec::new();
        for (_, mut items) in out.by_rule {
            items.sort_by_key(|(k, _)| *k);
            proposals.extend(items.into_iter().map(|(_, p)| p));
        }
        RuleOutput { proposals, failures: out.failures }
    }

    fn to_target(&self, view: &View<'_>, row: &Row) -> Result<Row, ProviderError> {
        translate_row(row, view.src.language, view.tgt.language, view.src.category, None, self.translator)
    }

    fn base(&self, view: &View<'_>, rule: Rule, src_row: usize) -> EditProposal {
        EditProposal {
            id: String::new(),
            rule,
            edit_type: rule.edit_type(),
            direction: view.direction,
            entity_id: view.src.entity_id.clone(),
            key: String::new(),
            source_key: view.src.rows[src_row].key.clone(),
            src_row: Some(src_row),
            tgt_row: None,
            deleted_rows: Vec::new(),
            old: Vec::new(),
            new: Vec::new(),
            evidence: Evidence::default(),
        }
    }

    fn row_transfer(&self, view: &View<'_>, s: usize) -> Result<EditProposal, (Rule, Option<usize>, ProviderError)> {
        let row = self.to_target(view, &view.src.rows[s]).map_err(|e| (Rule::R1, Some(s), e))?;
        let mut p = self.base(view, Rule::R1, s);
        p.key = row.key;
        p.new = row.values;
        Ok(finish(p))
    }

    fn multi_match(&self, view: &View<'_>, s: usize, t: [usize; 2]) -> Result<EditProposal, (Rule, Option<usize>, ProviderError)> {
        let row = self.to_target(view, &view.src.rows[s]).map_err(|e| (Rule::R2, Some(s), e))?;
        let mut p = self.base(view, Rule::R2, s);
        p.key = row.key;
        p.new = row.values;
        p.deleted_rows = t.to_vec();
        p.old = t.iter().flat_map(|&j| view.tgt.rows[j].values.clone()).collect();
        p.evidence.module = Some(Module::M5);
        Ok(finish(p))
    }

    /// Returns `None` when the rule does not fire.
    fn substitute(
        &self,
        view: &View<'_>,
        rule: Rule,
        s: usize,
        t: usize,
        pair: &Aligned,
    ) -> Option<Result<EditProposal, (Rule, Option<usize>, ProviderError)>> {
        let (src, tgt) = (&view.src.rows[s], &view.tgt.rows[t]);
        let mut ev = Evidence { module: Some(pair.module), score: Some(pair.score), ..Evidence::default() };
        let english = |side: &[Result<Row, ProviderError>], i: usize, orig: &Row| side[i].as_ref().ok().cloned().unwrap_or_else(|| orig.clone());
        let (src_en, tgt_en) = (english(view.src_en, s, src), english(view.tgt_en, t, tgt));

        let fires = match rule {
            Rule::R3 => {
                let st = extract_time(&src_en).or_else(|| extract_time(src));
                let tt = extract_time(&tgt_en).or_else(|| extract_time(tgt));
                ev.src_time = st;
                ev.tgt_time = tt;
                matches!((st, tt), (Some(a), Some(b)) if a.newer_than(&b))
            }
            Rule::R4 => {
                let trend = self.config.trend(&src_en.key).or_else(|| self.config.trend(&tgt_en.key));
                let number = |r: &Row| r.values.iter().find_map(|v| parse_numeric(v));
                let (a, b) = (number(&src_en), number(&tgt_en));
                ev.trend = trend.map(|t| format!("{t:?}").to_lowercase());
                ev.src_number = a;
                ev.tgt_number = b;
                match (trend, a, b) {
                    (Some(Trend::Increasing), Some(a), Some(b)) => a > b,
                    (Some(Trend::Decreasing), Some(a), Some(b)) => a < b,
                    _ => false,
                }
            }
            Rule::R6 => {
                let tier = |l| resource_tier(l, self.stats).ok();
                let (a, b) = (tier(view.src.language), tier(view.tgt.language));
                ev.src_tier = a;
                ev.tgt_tier = b;
                self.config.hr_lr && a == Some(Tier::High) && b == Some(Tier::Low) && self.differ(&src_en, &tgt_en, &mut ev)
            }
            Rule::R7 => {
                ev.src_rows = Some(view.src.len());
                ev.tgt_rows = Some(view.tgt.len());
                view.src.len() as f64 >= self.config.row_gap_ratio * view.tgt.len() as f64 && self.differ(&src_en, &tgt_en, &mut ev)
            }
            Rule::R8 => {
                let rare = |en: &[Result<Row, ProviderError>], table: &Infobox| {
                    (0..table.len()).filter(|&i| self.config.is_rare(&english(en, i, &table.rows[i]).key)).count()
                };
                let (a, b) = (rare(view.src_en, view.src), rare(view.tgt_en, view.tgt));
                ev.src_rare_keys = Some(a);
                ev.tgt_rare_keys = Some(b);
                a > b && self.differ(&src_en, &tgt_en, &mut ev)
            }
            _ => false,
        };
        if !fires {
            return None;
        }
        Some(self.to_target(view, src).map_err(|e| (rule, Some(s), e)).map(|row| {
            let mut p = self.base(view, rule, s);
            p.key = tgt.key.clone();
            p.tgt_row = Some(t);
            p.old = tgt.values.clone();
            p.new = row.values;
            p.evidence = ev;
            finish(p)
        }))
    }

    fn differ(&self, a: &Row, b: &Row, ev: &mut Evidence) -> bool {
        let unequal = joined(&a.values) != joined(&b.values);
        let Some(emb) = self.embedder else { return unequal };
        let sim = emb.embed(&a.values_text()).and_then(|va| emb.embed(&b.values_text()).and_then(|vb| cosine(&va, &vb)));
        let dissimilar = match sim {
            Ok(s) => {
                let s = s.to_f64().unwrap_or(0.0);
                ev.value_similarity = Some(s);
                s < self.config.value_difference_threshold
            }
            // Without a similarity the string comparison decides.
            Err(_) => unequal,
        };
        match self.config.difference_mode {
            DifferenceMode::Either => unequal || dissimilar,
            DifferenceMode::Both => unequal && dissimilar,
        }
    }

    fn append_value(
        &self,
        view: &View<'_>,
        s: usize,
        t: usize,
        pair: &Aligned,
    ) -> Option<Result<EditProposal, (Rule, Option<usize>, ProviderError)>> {
        let (src, tgt) = (&view.src.rows[s], &view.tgt.rows[t]);
        if src.values.len() <= tgt.values.len() {
            return None;
        }
        let row = match self.to_target(view, src) {
            Ok(r) => r,
            Err(e) => return Some(Err((Rule::R5, Some(s), e))),
        };
        let present: BTreeSet<String> = tgt.values.iter().map(|v| normalize_key(v)).collect();
        let missing: Vec<String> = row.values.into_iter().filter(|v| !present.contains(&normalize_key(v))).collect();
        if missing.is_empty() {
            return None;
        }
        let mut p = self.base(view, Rule::R5, s);
        p.key = tgt.key.clone();
        p.tgt_row = Some(t);
        p.old = tgt.values.clone();
        p.new = missing;
        p.evidence = Evidence { module: Some(pair.module), score: Some(pair.score), ..Evidence::default() };
        Some(Ok(finish(p)))
    }
}

/// Convenience wrapper without an embedder.
pub fn apply_rules<T: Scalar>(
    x: &Infobox,
    y: &Infobox,
    alignment: &AlignmentResult<T>,
    config: &UpdateConfig,
    stats: &CorpusStats,
    translator: &dyn Translator,
) -> RuleOutput {
    RuleEngine::<T>::new(config, stats, translator).apply(x, y, alignment)
}
