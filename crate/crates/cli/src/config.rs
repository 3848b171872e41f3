use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tabsync_core::corpus::LanguageCode;
use tabsync_core::eval::GridSpec;
use tabsync_core::providers::{
    CachedEmbedder, CachedTranslator, DictionaryTranslator, Embedder, HashedBowEmbedder, HttpEmbedder, HttpTranslator,
    IdentityTranslator, ProviderCache, ProviderConfig, Translator, VoteConfig,
};
use tabsync_core::update::UpdateConfig;
use tabsync_core::ThresholdSet;

use crate::CliError;

pub const TRANSLATE_URL: &str = "SYNC_TRANSLATE_URL";
pub const EMBED_URL: &str = "SYNC_EMBED_URL";
pub const CACHE_DIR: &str = "SYNC_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryEntry {
    pub src: LanguageCode,
    pub tgt: LanguageCode,
    pub from: String,
    pub to: String,
}

/// Contents of the `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub thresholds: Option<ThresholdSet>,
    pub update: UpdateConfig,
    pub vote: VoteConfig,
    pub grid: GridSpec,
    /// Entries for the offline dictionary translator; unknown text passes through.
    pub dictionary: Vec<DictionaryEntry>,
    pub url_template: Option<String>,
    /// Wiki-wide table counts for resource tiers. Empty means count the
    /// corpus itself.
    pub table_counts: BTreeMap<LanguageCode, usize>,
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::invalid(format!("config {}: {e}", path.display())))?;
        let cfg: CliConfig =
            serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("config {}: {e}", path.display())))?;
        cfg.update.validate().map_err(|e| CliError::invalid(format!("config {}: {e}", path.display())))?;
        cfg.grid.values().map_err(|e| CliError::invalid(format!("config {}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Thresholds from `--thresholds`, else the config, else the defaults.
    /// A named file that does not exist falls back with a warning.
    pub fn thresholds(&self, file: Option<&Path>) -> Result<ThresholdSet, CliError> {
        let set = match file {
            Some(p) if p.exists() => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::invalid(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("thresholds {}: {e}", p.display())))?
            }
            Some(p) => {
                tracing::warn!(path = %p.display(), "thresholds file not found, using defaults");
                self.thresholds.unwrap_or_default()
            }
            None => self.thresholds.unwrap_or_default(),
        };
        set.validate().map_err(|e| CliError::invalid(e.to_string()))?;
        Ok(set)
    }

    /// Stable hash of the effective configuration.
    pub fn hash(&self, thresholds: Option<&ThresholdSet>, extra: &[(&str, String)]) -> String {
        let value = serde_json::json!({
            "config": self,
            "thresholds": thresholds,
            "extra": extra.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>(),
        });
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }
}

/// Translation and embedding backends chosen from the environment.
pub struct Providers {
    pub translator: Box<dyn Translator>,
    pub embedder: Box<dyn Embedder<f64>>,
    pub description: String,
    pub cache_path: Option<PathBuf>,
}

impl Providers {
    pub fn from_env(cfg: &CliConfig) -> Result<Self, CliError> {
        let env = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        let cache = match env(CACHE_DIR) {
            Some(dir) => {
                let path = PathBuf::from(dir).join("provider-cache.jsonl");
                Some((Arc::new(ProviderCache::open(&path).map_err(CliError::provider)?), path))
            }
            None => None,
        };
        let (translator, t_desc): (Box<dyn Translator>, String) = match env(TRANSLATE_URL) {
            Some(url) => (Box::new(HttpTranslator::new(&ProviderConfig::http(&url)).map_err(CliError::provider)?), url),
            None if cfg.dictionary.is_empty() => (Box::new(IdentityTranslator), "identity".into()),
            None => {
                let mut d = DictionaryTranslator::new().passthrough();
                for e in &cfg.dictionary {
                    d.insert(e.src, e.tgt, &e.from, &e.to);
                }
                (Box::new(d), "dictionary".into())
            }
        };
        let (embedder, e_desc): (Box<dyn Embedder<f64>>, String) = match env(EMBED_URL) {
            Some(url) => (Box::new(HttpEmbedder::new(&ProviderConfig::http(&url)).map_err(CliError::provider)?), url),
            None => (Box::new(HashedBowEmbedder::default()), "hashed-bow".into()),
        };
        let (translator, embedder, cache_path): (Box<dyn Translator>, Box<dyn Embedder<f64>>, _) = match cache {
            Some((c, path)) => (
                Box::new(CachedTranslator::new(translator, c.clone())),
                Box::new(CachedEmbedder::new(embedder, c)),
                Some(path),
            ),
            None => (translator, embedder, None),
        };
        Ok(Providers { translator, embedder, description: format!("translate={t_desc} embed={e_desc}"), cache_path })
    }
}
