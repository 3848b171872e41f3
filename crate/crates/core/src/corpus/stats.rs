use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Category, Corpus, CorpusError, LanguageCode};

/// Language resource class by number of tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    Low,
    Medium,
    High,
}

impl Tier {
    pub const LOW_BELOW: usize = 6000;
    pub const HIGH_ABOVE: usize = 10000;

    pub fn from_table_count(count: usize) -> Tier {
        if count < Self::LOW_BELOW {
            Tier::Low
        } else if count <= Self::HIGH_ABOVE {
            Tier::Medium
        } else {
            Tier::High
        }
    }
}

/// Per-category entity count and mean per-entity standard deviation of table
/// size across the languages the entity appears in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategorySpread {
    pub entities: usize,
    pub std_dev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferStats {
    /// Mean percentage of this language's entities missing elsewhere.
    pub outbound_pct: f64,
    /// Mean count of entities other languages could contribute, as a
    /// percentage of this language's entity count.
    pub inbound_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorpusStats {
    pub table_count: BTreeMap<LanguageCode, usize>,
    pub avg_rows: BTreeMap<LanguageCode, f64>,
    pub avg_rows_by_category: BTreeMap<Category, f64>,
    /// normalized key → category → occurrences
    pub key_frequency: BTreeMap<String, BTreeMap<Category, usize>>,
    pub entity_presence: BTreeMap<String, BTreeSet<LanguageCode>>,
    pub category_spread: BTreeMap<Category, CategorySpread>,
    pub total_keys: usize,
}

/// Lowercases and collapses whitespace so key lookups ignore cosmetic variation.
pub fn normalize_key(key: &str) -> String {
    key.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl CorpusStats {
    /// Computes every statistic in one pass over the corpus.
    ///
    /// Key frequencies count keys as they appear in the tables; run this on
    /// an English projection of the corpus to obtain English-key frequencies.
    pub fn compute(corpus: &Corpus) -> CorpusStats {
        let mut stats = CorpusStats::default();
        let mut rows_per_lang: BTreeMap<LanguageCode, usize> = BTreeMap::new();
        let mut rows_per_cat: BTreeMap<Category, (usize, usize)> = BTreeMap::new();
        let mut sizes: BTreeMap<&str, (Category, Vec<f64>)> = BTreeMap::new();

        for t in corpus.tables() {
            *stats.table_count.entry(t.language).or_default() += 1;
            *rows_per_lang.entry(t.language).or_default() += t.len();
            let cat = rows_per_cat.entry(t.category).or_default();
            cat.0 += 1;
            cat.1 += t.len();
            for row in &t.rows {
                *stats
                    .key_frequency
                    .entry(normalize_key(&row.key))
                    .or_default()
                    .entry(t.category)
                    .or_default() += 1;
                stats.total_keys += 1;
            }
            stats.entity_presence.entry(t.entity_id.clone()).or_default().insert(t.language);
            sizes
                .entry(t.entity_id.as_str())
                .or_insert_with(|| (t.category, Vec::new()))
                .1
                .push(t.len() as f64);
        }

        for (lang, count) in &stats.table_count {
            stats.avg_rows.insert(*lang, rows_per_lang[lang] as f64 / *count as f64);
        }
        for (cat, (tables, rows)) in rows_per_cat {
            stats.avg_rows_by_category.insert(cat, rows as f64 / tables as f64);
        }

        let mut spread: BTreeMap<Category, (usize, Vec<f64>)> = BTreeMap::new();
        for (category, table_sizes) in sizes.values() {
            let entry = spread.entry(*category).or_default();
            entry.0 += 1;
            if table_sizes.len() >= 2 {
                entry.1.push(population_std_dev(table_sizes));
            }
        }
        for (cat, (entities, devs)) in spread {
            let std_dev = if devs.is_empty() { 0.0 } else { devs.iter().sum::<f64>() / devs.len() as f64 };
            stats.category_spread.insert(cat, CategorySpread { entities, std_dev });
        }
        stats
    }

    /// Stats carrying only table counts, for tier lookups when the corpus
    /// itself is not at hand.
    pub fn from_table_counts(counts: impl IntoIterator<Item = (LanguageCode, usize)>) -> CorpusStats {
        CorpusStats { table_count: counts.into_iter().collect(), ..Default::default() }
    }

    /// Occurrences of a key summed over categories.
    pub fn key_total(&self, key: &str) -> usize {
        self.key_frequency.get(&normalize_key(key)).map(|m| m.values().sum()).unwrap_or(0)
    }
}

fn population_std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

pub fn resource_tier(language: LanguageCode, stats: &CorpusStats) -> Result<Tier, CorpusError> {
    stats
        .table_count
        .get(&language)
        .map(|&c| Tier::from_table_count(c))
        .ok_or_else(|| CorpusError::UnknownLanguage(language.to_string()))
}

/// Normalized keys whose corpus frequency is at most `cutoff`.
pub fn rare_keys(stats: &CorpusStats, cutoff: usize) -> BTreeSet<String> {
    stats
        .key_frequency
        .iter()
        .filter(|(_, per_cat)| per_cat.values().sum::<usize>() <= cutoff)
        .map(|(k, _)| k.clone())
        .collect()
}

fn entities_by_language(corpus: &Corpus) -> BTreeMap<LanguageCode, BTreeSet<&str>> {
    let mut out: BTreeMap<LanguageCode, BTreeSet<&str>> = BTreeMap::new();
    for t in corpus.tables() {
        out.entry(t.language).or_default().insert(t.entity_id.as_str());
    }
    out
}

/// Average table transfer percentages for every language in the corpus.
/// The comparison set for a language is every other language present.
pub fn transfer_stats(corpus: &Corpus) -> BTreeMap<LanguageCode, TransferStats> {
    let by_lang = entities_by_language(corpus);
    let mut out = BTreeMap::new();
    for (lang, own) in &by_lang {
        let others: Vec<_> = by_lang.iter().filter(|(l, _)| *l != lang).map(|(_, e)| e).collect();
        if others.is_empty() || own.is_empty() {
            out.insert(*lang, TransferStats { outbound_pct: 0.0, inbound_pct: 0.0 });
            continue;
        }
        let base = own.len() as f64;
        let mut outbound = 0.0;
        let mut inbound = 0.0;
        for other in &others {
            outbound += own.difference(other).count() as f64 / base;
            inbound += other.difference(own).count() as f64 / base;
        }
        let n = others.len() as f64;
        out.insert(
            *lang,
            TransferStats { outbound_pct: 100.0 * outbound / n, inbound_pct: 100.0 * inbound / n },
        );
    }
    out
}

/// Mean absolute row-count gap between `language` and the other languages
/// sharing each entity, averaged over entities that are shared at all.
/// `None` when the language shares no entity.
pub fn row_difference(corpus: &Corpus, language: LanguageCode) -> Option<f64> {
    let mut per_entity = Vec::new();
    for t in corpus.tables().iter().filter(|t| t.language == language) {
        let gaps: Vec<f64> = corpus
            .tables()
            .iter()
            .filter(|o| o.language != language && o.entity_id == t.entity_id)
            .map(|o| (t.len() as f64 - o.len() as f64).abs())
            .collect();
        if !gaps.is_empty() {
            per_entity.push(gaps.iter().sum::<f64>() / gaps.len() as f64);
        }
    }
    if per_entity.is_empty() {
        None
    } else {
        Some(per_entity.iter().sum::<f64>() / per_entity.len() as f64)
    }
}

pub fn compute_stats(corpus: &Corpus) -> CorpusStats {
    CorpusStats::compute(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Infobox, Row};
    use chrono::NaiveDate;

    fn table(entity: &str, lang: LanguageCode, rows: usize) -> Infobox {
        let rows = (0..rows).map(|i| Row::new(format!("k{i}"), [format!("v{i}")]).unwrap()).collect();
        Infobox::new(entity, lang, Category::Person, NaiveDate::from_ymd_opt(2023, 5, 1).unwrap(), rows).unwrap()
    }

    #[test]
    fn counts_and_average_rows() {
        let c = Corpus::new(
            vec![table("A", LanguageCode::En, 4), table("B", LanguageCode::En, 5), table("C", LanguageCode::En, 6)],
            vec![],
        );
        let s = CorpusStats::compute(&c);
        assert_eq!(s.table_count[&LanguageCode::En], 3);
        assert_eq!(s.avg_rows[&LanguageCode::En], 5.0);
        assert!(!s.table_count.contains_key(&LanguageCode::Hi));
        assert!(!s.avg_rows.contains_key(&LanguageCode::Hi));
        assert_eq!(s.total_keys, 15);
        let summed: usize = s.key_frequency.values().flat_map(|m| m.values()).sum();
        assert_eq!(summed, s.total_keys);
    }

    #[test]
    fn tier_boundaries() {
        assert_eq!(Tier::from_table_count(5999), Tier::Low);
        assert_eq!(Tier::from_table_count(6000), Tier::Medium);
        assert_eq!(Tier::from_table_count(10000), Tier::Medium);
        assert_eq!(Tier::from_table_count(10001), Tier::High);
        let s = CorpusStats::from_table_counts([(LanguageCode::Ar, 7648)]);
        assert_eq!(resource_tier(LanguageCode::Ar, &s).unwrap(), Tier::Medium);
        assert!(resource_tier(LanguageCode::Sv, &s).is_err());
    }

    #[test]
    fn rare_key_cutoffs() {
        let mut s = CorpusStats::default();
        s.key_frequency.entry("thesis".into()).or_default().insert(Category::Person, 33);
        s.key_frequency.entry("born".into()).or_default().insert(Category::Person, 120);
        let rare = rare_keys(&s, 50);
        assert!(rare.contains("thesis"));
        assert!(!rare.contains("born"));
        assert!(rare_keys(&s, 0).is_empty());
    }

    #[test]
    fn transfer_two_languages() {
        let c = Corpus::new(
            vec![table("A", LanguageCode::En, 3), table("B", LanguageCode::En, 3), table("A", LanguageCode::Hi, 3)],
            vec![],
        );
        let t = transfer_stats(&c);
        assert_eq!(t[&LanguageCode::En].outbound_pct, 50.0);
        assert_eq!(t[&LanguageCode::En].inbound_pct, 0.0);
        assert_eq!(t[&LanguageCode::Hi].outbound_pct, 0.0);
        assert_eq!(t[&LanguageCode::Hi].inbound_pct, 100.0);
    }

    #[test]
    fn transfer_full_overlap_is_zero() {
        let c = Corpus::new(vec![table("A", LanguageCode::En, 3), table("A", LanguageCode::De, 2)], vec![]);
        for v in transfer_stats(&c).values() {
            assert_eq!((v.outbound_pct, v.inbound_pct), (0.0, 0.0));
        }
    }

    #[test]
    fn row_difference_single_entity() {
        let c = Corpus::new(vec![table("A", LanguageCode::En, 6), table("A", LanguageCode::Hi, 4)], vec![]);
        assert_eq!(row_difference(&c, LanguageCode::En), Some(2.0));
        let same = Corpus::new(vec![table("A", LanguageCode::En, 4), table("A", LanguageCode::Hi, 4)], vec![]);
        assert_eq!(row_difference(&same, LanguageCode::Hi), Some(0.0));
        assert_eq!(row_difference(&same, LanguageCode::Fr), None);
    }

    #[test]
    fn category_spread_uses_population_std_dev() {
        let c = Corpus::new(vec![table("A", LanguageCode::En, 6), table("A", LanguageCode::Hi, 4)], vec![]);
        let s = CorpusStats::compute(&c);
        let spread = s.category_spread[&Category::Person];
        assert_eq!(spread.entities, 1);
        assert_eq!(spread.std_dev, 1.0);
    }
}
