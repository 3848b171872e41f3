//! Deterministic offline providers.

use std::collections::HashMap;

use crate::corpus::LanguageCode;
use crate::scalar::Scalar;

use super::{Embedder, EmbeddingVector, ProviderError, TranslationContext, Translator};

/// Returns every input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn translate(&self, text: &str, _: LanguageCode, _: LanguageCode, _: &TranslationContext) -> Result<String, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        Ok(text.to_string())
    }
}

/// Looks translations up in a fixed table. Same-language requests are the
/// identity; unknown entries fail unless `passthrough` is set.
#[derive(Debug, Clone, Default)]
pub struct DictionaryTranslator {
    entries: HashMap<(LanguageCode, LanguageCode, String), String>,
    passthrough: bool,
}

impl DictionaryTranslator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Unknown entries are returned unchanged instead of failing.
    pub fn passthrough(mut self) -> Self {
        self.passthrough = true;
        self
    }

    pub fn with(mut self, src: LanguageCode, tgt: LanguageCode, from: &str, to: &str) -> Self {
        self.insert(src, tgt, from, to);
        self
    }

    /// Adds the entry in both directions.
    pub fn with_pair(mut self, a: LanguageCode, b: LanguageCode, text_a: &str, text_b: &str) -> Self {
        self.insert(a, b, text_a, text_b);
        self.insert(b, a, text_b, text_a);
        self
    }

    pub fn insert(&mut self, src: LanguageCode, tgt: LanguageCode, from: &str, to: &str) {
        self.entries.insert((src, tgt, from.trim().to_string()), to.to_string());
    }
}

impl Translator for DictionaryTranslator {
    fn translate(&self, text: &str, src: LanguageCode, tgt: LanguageCode, _: &TranslationContext) -> Result<String, ProviderError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        if src == tgt {
            return Ok(text.to_string());
        }
        match self.entries.get(&(src, tgt, text.to_string())) {
            Some(t) if t.trim().is_empty() => Err(ProviderError::EmptyTranslation(text.to_string())),
            Some(t) => Ok(t.clone()),
            None if self.passthrough => Ok(text.to_string()),
            None => Err(ProviderError::NoTranslation { text: text.to_string(), src, tgt }),
        }
    }
}

/// Lowercased alphanumeric tokens.
pub(crate) fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Bag-of-words embedder: token counts hashed into a fixed number of buckets,
/// then normalized. Texts without word characters hash as a single token.
#[derive(Debug, Clone, Copy)]
pub struct HashedBowEmbedder {
    dim: usize,
}

impl HashedBowEmbedder {
    pub const DEFAULT_DIM: usize = 4096;

    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashedBowEmbedder { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl Default for HashedBowEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM)
    }
}

impl<T: Scalar> Embedder<T> for HashedBowEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector<T>, ProviderError> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        let mut toks = tokens(trimmed);
        if toks.is_empty() {
            toks.push(trimmed.to_string());
        }
        let mut counts = vec![T::zero(); self.dim];
        for t in toks {
            let slot = (fnv1a(t.as_bytes()) % self.dim as u64) as usize;
            counts[slot] = counts[slot] + T::one();
        }
        EmbeddingVector::normalized(counts)
    }
}

/// Explicit text → vector table, for fixtures that need exact similarities.
/// Texts not in the table go to the fallback embedder, if any.
pub struct TableEmbedder<T: Scalar> {
    table: HashMap<String, EmbeddingVector<T>>,
    fallback: Option<Box<dyn Embedder<T>>>,
}

impl<T: Scalar> TableEmbedder<T> {
    pub fn new() -> Self {
        TableEmbedder { table: HashMap::new(), fallback: None }
    }

    pub fn with_fallback(mut self, fallback: impl Embedder<T> + 'static) -> Self {
        self.fallback = Some(Box::new(fallback));
        self
    }

    /// Registers `text`; the vector is normalized.
    pub fn with(mut self, text: &str, vector: Vec<T>) -> Self {
        self.insert(text, vector);
        self
    }

    pub fn insert(&mut self, text: &str, vector: Vec<T>) {
        let v = EmbeddingVector::normalized(vector).expect("fixture vector must be non-zero");
        self.table.insert(text.trim().to_string(), v);
    }
}

impl<T: Scalar> Default for TableEmbedder<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Embedder<T> for TableEmbedder<T> {
    fn embed(&self, text: &str) -> Result<EmbeddingVector<T>, ProviderError> {
        let key = text.trim();
        if key.is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        if let Some(v) = self.table.get(key) {
            return Ok(v.clone());
        }
        match &self.fallback {
            Some(f) => f.embed(key),
            None => Err(ProviderError::Backend(format!("no fixture vector for `{key}`"))),
        }
    }
}
