//! Append-only response cache shared by translation and embedding wrappers.
//!
//! Records are newline-delimited JSON `{"key","op","value"}`. The first value
//! stored under a key wins, so concurrent misses on the same key still hand
//! every caller the same answer.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::marker::PhantomData;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::corpus::LanguageCode;
use crate::scalar::Scalar;

use super::{Embedder, EmbeddingVector, ProviderError, TranslationContext, Translator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub op: String,
    pub value: Value,
}

#[derive(Debug, Default)]
pub struct ProviderCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, Value>>,
    writer: Mutex<Option<File>>,
}

impl ProviderCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a cache file and loads its records.
    /// A torn final line from an interrupted write is ignored.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| ProviderError::Cache(e.to_string()))?;
            }
        }
        let mut entries = HashMap::new();
        if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(|e| ProviderError::Cache(e.to_string()))?;
            for (n, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheRecord>(line) {
                    Ok(r) => {
                        entries.entry(r.key).or_insert(r.value);
                    }
                    Err(e) => tracing::warn!(line = n + 1, error = %e, "skipping unreadable cache record"),
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| ProviderError::Cache(e.to_string()))?;
        Ok(ProviderCache { path: Some(path), entries: RwLock::new(entries), writer: Mutex::new(Some(file)) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.read().is_empty()
    }

    pub fn key(op: &str, parts: &impl Serialize) -> String {
        let body = serde_json::to_string(&(op, parts)).expect("cache key parts serialize");
        hex::encode(Sha256::digest(body.as_bytes()))
    }

    pub fn get(&self, key: &str) -> Option<Value> {
        self.entries.read().get(key).cloned()
    }

    /// Stores `value` unless the key is already present; returns the value
    /// that is now authoritative for the key.
    pub fn insert(&self, key: String, op: &str, value: Value) -> Result<Value, ProviderError> {
        let mut writer = self.writer.lock();
        if let Some(existing) = self.entries.read().get(&key) {
            return Ok(existing.clone());
        }
        if let Some(file) = writer.as_mut() {
            let record = CacheRecord { key: key.clone(), op: op.to_string(), value: value.clone() };
            let mut line = serde_json::to_string(&record).map_err(|e| ProviderError::Cache(e.to_string()))?;
            line.push('\n');
            file.write_all(line.as_bytes()).map_err(|e| ProviderError::Cache(e.to_string()))?;
        }
        self.entries.write().insert(key, value.clone());
        Ok(value)
    }
}

fn context_hash(ctx: &TranslationContext) -> String {
    let body = serde_json::to_string(ctx).expect("context serializes");
    hex::encode(Sha256::digest(body.as_bytes()))
}

pub struct CachedTranslator<X> {
    inner: X,
    cache: Arc<ProviderCache>,
}

impl<X: Translator> CachedTranslator<X> {
    pub fn new(inner: X, cache: Arc<ProviderCache>) -> Self {
        CachedTranslator { inner, cache }
    }

    pub fn cache(&self) -> &Arc<ProviderCache> {
        &self.cache
    }
}

impl<X: Translator> Translator for CachedTranslator<X> {
    fn translate(&self, text: &str, src: LanguageCode, tgt: LanguageCode, ctx: &TranslationContext) -> Result<String, ProviderError> {
        let key = ProviderCache::key("translate", &(text, src, tgt, context_hash(ctx)));
        if let Some(Value::String(s)) = self.cache.get(&key) {
            return Ok(s);
        }
        let out = self.inner.translate(text, src, tgt, ctx)?;
        match self.cache.insert(key, "translate", Value::String(out))? {
            Value::String(s) => Ok(s),
            other => Err(ProviderError::Cache(format!("translation cached as {other}"))),
        }
    }
}

pub struct CachedEmbedder<X, T> {
    inner: X,
    cache: Arc<ProviderCache>,
    _scalar: PhantomData<fn() -> T>,
}

impl<X: Embedder<T>, T: Scalar> CachedEmbedder<X, T> {
    pub fn new(inner: X, cache: Arc<ProviderCache>) -> Self {
        CachedEmbedder { inner, cache, _scalar: PhantomData }
    }
}

impl<X: Embedder<T>, T: Scalar> Embedder<T> for CachedEmbedder<X, T> {
    fn embed(&self, text: &str) -> Result<EmbeddingVector<T>, ProviderError> {
        let key = ProviderCache::key("embed", &text);
        let value = match self.cache.get(&key) {
            Some(v) => v,
            None => {
                let v = self.inner.embed(text)?;
                let raw: Vec<f64> = v.values().iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect();
                self.cache.insert(key, "embed", serde_json::to_value(raw).expect("vector serializes"))?
            }
        };
        let raw: Vec<f64> = serde_json::from_value(value).map_err(|e| ProviderError::Cache(e.to_string()))?;
        let values = raw
            .into_iter()
            .map(|x| T::from_f64(x).ok_or_else(|| ProviderError::Cache("vector component out of range".into())))
            .collect::<Result<Vec<T>, _>>()?;
        EmbeddingVector::from_unit(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{DictionaryTranslator, HashedBowEmbedder};
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting<X> {
        inner: X,
        calls: AtomicUsize,
    }

    impl<X: Translator> Translator for Counting<X> {
        fn translate(&self, t: &str, s: LanguageCode, g: LanguageCode, c: &TranslationContext) -> Result<String, ProviderError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.translate(t, s, g, c)
        }
    }

    #[test]
    fn replay_skips_backend() {
        let dict = DictionaryTranslator::new().with(LanguageCode::Hi, LanguageCode::En, "जन्म", "Born");
        let counting = Counting { inner: dict, calls: AtomicUsize::new(0) };
        let t = CachedTranslator::new(&counting, Arc::new(ProviderCache::in_memory()));
        let ctx = TranslationContext::default();
        let a = t.translate("जन्म", LanguageCode::Hi, LanguageCode::En, &ctx).unwrap();
        let b = t.translate("जन्म", LanguageCode::Hi, LanguageCode::En, &ctx).unwrap();
        assert_eq!(a.as_bytes(), b.as_bytes());
        assert_eq!(counting.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn persisted_records_reload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let first: EmbeddingVector<f32> = {
            let cache = Arc::new(ProviderCache::open(&path).unwrap());
            CachedEmbedder::new(HashedBowEmbedder::new(64), cache).embed("born in 1897").unwrap()
        };
        let cache = Arc::new(ProviderCache::open(&path).unwrap());
        assert_eq!(cache.len(), 1);
        let failing = crate::providers::TableEmbedder::<f32>::new();
        let replay = CachedEmbedder::new(failing, cache).embed("born in 1897").unwrap();
        assert_eq!(first, replay);
    }

    #[test]
    fn first_insert_wins() {
        let c = ProviderCache::in_memory();
        let k = ProviderCache::key("translate", &"x");
        assert_eq!(c.insert(k.clone(), "translate", Value::from("a")).unwrap(), Value::from("a"));
        assert_eq!(c.insert(k, "translate", Value::from("b")).unwrap(), Value::from("a"));
    }
}
