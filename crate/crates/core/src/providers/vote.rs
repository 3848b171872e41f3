//! Majority-voted key translations.
//!
//! Every occurrence of a frequent key is translated with its own row values
//! and category as context; the English key chosen for the entry is the most
//! common translation, ties going to the lexicographically smaller string.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Category, Corpus, LanguageCode, Row};

use super::{ProviderError, TranslationContext, Translator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteConfig {
    /// Keys seen fewer times than this (per language and category) are not voted.
    pub min_occurrences: usize,
    /// Only the most frequent keys of each (language, category) are voted.
    pub top_keys_per_category: Option<usize>,
}

impl Default for VoteConfig {
    fn default() -> Self {
        VoteConfig { min_occurrences: 1, top_keys_per_category: Some(100) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteEntry {
    pub language: LanguageCode,
    pub category: Category,
    pub key: String,
    pub english_key: String,
    pub votes: BTreeMap<String, usize>,
}

impl VoteEntry {
    fn from_votes(language: LanguageCode, category: Category, key: String, votes: BTreeMap<String, usize>) -> Option<Self> {
        // BTreeMap iterates in ascending key order, so keeping the first
        // strict maximum yields the lexicographically smallest winner.
        let mut best: Option<(&String, usize)> = None;
        for (k, &n) in &votes {
            if best.is_none_or(|(_, b)| n > b) {
                best = Some((k, n));
            }
        }
        let english_key = best?.0.clone();
        Some(VoteEntry { language, category, key, english_key, votes })
    }

    pub fn winner_votes(&self) -> usize {
        self.votes.get(&self.english_key).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KeyTranslationMap {
    entries: BTreeMap<(LanguageCode, Category, String), VoteEntry>,
}

// JSON object keys must be strings, so the map travels as a list of entries.
impl Serialize for KeyTranslationMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.entries.values())
    }
}

impl<'de> Deserialize<'de> for KeyTranslationMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let mut map = KeyTranslationMap::new();
        for e in Vec::<VoteEntry>::deserialize(d)? {
            map.insert(e);
        }
        Ok(map)
    }
}

impl KeyTranslationMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn lookup(&self, language: LanguageCode, category: Category, key: &str) -> Option<&str> {
        self.entries.get(&(language, category, key.trim().to_string())).map(|e| e.english_key.as_str())
    }

    pub fn entry(&self, language: LanguageCode, category: Category, key: &str) -> Option<&VoteEntry> {
        self.entries.get(&(language, category, key.trim().to_string()))
    }

    pub fn entries(&self) -> impl Iterator<Item = &VoteEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, entry: VoteEntry) {
        self.entries.insert((entry.language, entry.category, entry.key.clone()), entry);
    }

    /// Builds an entry from raw votes and inserts it.
    pub fn insert_votes(&mut self, language: LanguageCode, category: Category, key: &str, votes: BTreeMap<String, usize>) {
        if let Some(e) = VoteEntry::from_votes(language, category, key.trim().to_string(), votes) {
            self.insert(e);
        }
    }
}

#[derive(Debug, Error)]
#[error("voting stopped at `{key}` ({language}, {category}) after {} entries: {source}", partial.len())]
pub struct VoteError {
    pub partial: KeyTranslationMap,
    pub language: LanguageCode,
    pub category: Category,
    pub key: String,
    #[source]
    pub source: ProviderError,
}

/// Votes English translations for the frequent non-English keys of `corpus`.
pub fn build_vote_map(corpus: &Corpus, translator: &dyn Translator, config: &VoteConfig) -> Result<KeyTranslationMap, VoteError> {
    let mut occurrences: BTreeMap<(LanguageCode, Category), BTreeMap<String, Vec<&Row>>> = BTreeMap::new();
    for t in corpus.tables().iter().filter(|t| !t.language.is_english()) {
        let per_key = occurrences.entry((t.language, t.category)).or_default();
        for row in &t.rows {
            per_key.entry(row.key.clone()).or_default().push(row);
        }
    }

    let mut map = KeyTranslationMap::new();
    for ((language, category), per_key) in occurrences {
        let mut eligible: Vec<(&String, &Vec<&Row>)> =
            per_key.iter().filter(|(_, rows)| rows.len() >= config.min_occurrences.max(1)).collect();
        eligible.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(b.0)));
        if let Some(k) = config.top_keys_per_category {
            eligible.truncate(k);
        }
        for (key, rows) in eligible {
            let mut votes: BTreeMap<String, usize> = BTreeMap::new();
            for row in rows {
                let ctx = TranslationContext::for_key(&row.values, category);
                match translator.translate(key, language, LanguageCode::En, &ctx) {
                    Ok(t) if !t.trim().is_empty() => *votes.entry(t.trim().to_string()).or_default() += 1,
                    Ok(_) => {
                        return Err(VoteError {
                            partial: map,
                            language,
                            category,
                            key: key.clone(),
                            source: ProviderError::EmptyTranslation(key.clone()),
                        })
                    }
                    Err(source) => return Err(VoteError { partial: map, language, category, key: key.clone(), source }),
                }
            }
            map.insert_votes(language, category, key, votes);
        }
    }
    Ok(map)
}
