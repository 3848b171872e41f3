//! Translation and embedding services behind small traits, with offline
//! stubs, an HTTP client, a persistent response cache and the voted
//! key-translation map.

mod cache;
mod http;
mod stub;
mod translate;
mod vote;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Category, LanguageCode};
use crate::scalar::Scalar;

pub use cache::{CacheRecord, CachedEmbedder, CachedTranslator, ProviderCache};
pub use http::{HttpEmbedder, HttpTranslator, ProviderConfig};
pub use stub::{DictionaryTranslator, HashedBowEmbedder, IdentityTranslator, TableEmbedder};
pub use translate::{translate_row, translate_table, TableTranslationError};
pub use vote::{build_vote_map, KeyTranslationMap, VoteConfig, VoteEntry, VoteError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("empty translation for `{0}`")]
    EmptyTranslation(String),
    #[error("empty input text")]
    EmptyInput,
    #[error("no translation for `{text}` ({src} -> {tgt})")]
    NoTranslation { text: String, src: LanguageCode, tgt: LanguageCode },
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid embedding: {0}")]
    InvalidVector(String),
    #[error("cache error: {0}")]
    Cache(String),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ProviderError::Unreachable(_))
    }
}

/// Side information passed to the translator to disambiguate short keys.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TranslationContext {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
}

impl TranslationContext {
    pub fn for_key(values: &[String], category: Category) -> Self {
        TranslationContext { key: None, values: values.to_vec(), category: Some(category) }
    }

    pub fn for_value(key: &str, category: Category) -> Self {
        TranslationContext { key: Some(key.to_string()), values: Vec::new(), category: Some(category) }
    }
}

pub trait Translator: Send + Sync {
    fn translate(
        &self,
        text: &str,
        src: LanguageCode,
        tgt: LanguageCode,
        context: &TranslationContext,
    ) -> Result<String, ProviderError>;
}

pub trait Embedder<T: Scalar>: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector<T>, ProviderError>;
}

impl<X: Translator + ?Sized> Translator for &X {
    fn translate(&self, text: &str, src: LanguageCode, tgt: LanguageCode, c: &TranslationContext) -> Result<String, ProviderError> {
        (**self).translate(text, src, tgt, c)
    }
}

impl<X: Translator + ?Sized> Translator for Arc<X> {
    fn translate(&self, text: &str, src: LanguageCode, tgt: LanguageCode, c: &TranslationContext) -> Result<String, ProviderError> {
        (**self).translate(text, src, tgt, c)
    }
}

impl<X: Translator + ?Sized> Translator for Box<X> {
    fn translate(&self, text: &str, src: LanguageCode, tgt: LanguageCode, c: &TranslationContext) -> Result<String, ProviderError> {
        (**self).translate(text, src, tgt, c)
    }
}

impl<T: Scalar, X: Embedder<T> + ?Sized> Embedder<T> for &X {
    fn embed(&self, text: &str) -> Result<EmbeddingVector<T>, ProviderError> {
        (**self).embed(text)
    }
}

impl<T: Scalar, X: Embedder<T> + ?Sized> Embedder<T> for Arc<X> {
    fn embed(&self, text: &str) -> Result<EmbeddingVector<T>, ProviderError> {
        (**self).embed(text)
    }
}

impl<T: Scalar, X: Embedder<T> + ?Sized> Embedder<T> for Box<X> {
    fn embed(&self, text: &str) -> Result<EmbeddingVector<T>, ProviderError> {
        (**self).embed(text)
    }
}

/// A unit-norm embedding.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct EmbeddingVector<T: Scalar> {
    values: Vec<T>,
}

impl<T: Scalar> EmbeddingVector<T> {
    /// Normalizes `values` to unit length.
    pub fn normalized(values: Vec<T>) -> Result<Self, ProviderError> {
        if values.is_empty() {
            return Err(ProviderError::InvalidVector("empty vector".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ProviderError::InvalidVector("non-finite component".into()));
        }
        let norm = values.iter().map(|v| *v * *v).sum::<T>().sqrt();
        if norm == T::zero() {
            return Err(ProviderError::InvalidVector("zero vector".into()));
        }
        Ok(EmbeddingVector { values: values.into_iter().map(|v| v / norm).collect() })
    }

    /// Wraps values that must already have unit norm.
    pub fn from_unit(values: Vec<T>) -> Result<Self, ProviderError> {
        let norm = values.iter().map(|v| *v * *v).sum::<T>().sqrt();
        if values.is_empty() || !norm.is_finite() || (norm - T::one()).abs() > T::unit_norm_tolerance() {
            return Err(ProviderError::InvalidVector(format!("norm {norm} is not 1")));
        }
        Ok(EmbeddingVector { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> T {
        self.values.iter().map(|v| *v * *v).sum::<T>().sqrt()
    }
}

/// Cosine similarity clamped to [-1, 1]. Identical vectors score exactly 1.
pub fn cosine<T: Scalar>(a: &EmbeddingVector<T>, b: &EmbeddingVector<T>) -> Result<T, ProviderError> {
    if a.dim() != b.dim() {
        return Err(ProviderError::DimensionMismatch(a.dim(), b.dim()));
    }
    if a.values == b.values {
        return Ok(T::one());
    }
    let dot: T = a.values.iter().zip(&b.values).map(|(x, y)| *x * *y).sum();
    let denom = a.norm() * b.norm();
    let c = dot / denom;
    Ok(c.max(-T::one()).min(T::one()))
}
