//! JSON-over-HTTP client for external translation and embedding services.
//!
//! `POST {base}/translate {"text","src","tgt","context"}` → `{"text"}`
//! `POST {base}/embed {"text"}` → `{"vector": [...]}`

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::LanguageCode;
use crate::scalar::Scalar;

use super::{Embedder, EmbeddingVector, ProviderError, TranslationContext, Translator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    /// Base URL, or `"stub"` for the offline providers.
    pub endpoint: String,
    #[serde(default)]
    pub cache_path: Option<PathBuf>,
    #[serde(with = "millis", default = "default_timeout")]
    pub timeout: Duration,
    #[serde(default = "default_retries")]
    pub retries: u32,
}

fn default_timeout() -> Duration {
    Duration::from_secs(30)
}

fn default_retries() -> u32 {
    2
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

impl ProviderConfig {
    pub fn stub() -> Self {
        ProviderConfig { endpoint: "stub".into(), cache_path: None, timeout: default_timeout(), retries: default_retries() }
    }

    pub fn http(endpoint: impl Into<String>) -> Self {
        ProviderConfig { endpoint: endpoint.into(), ..Self::stub() }
    }

    pub fn is_stub(&self) -> bool {
        self.endpoint == "stub"
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.timeout.is_zero() {
            return Err(ProviderError::Backend("provider timeout must be positive".into()));
        }
        if !self.is_stub() && !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
            return Err(ProviderError::Backend(format!("endpoint `{}` is neither a URL nor `stub`", self.endpoint)));
        }
        Ok(())
    }
}

struct Client {
    http: reqwest::blocking::Client,
    base: String,
    retries: u32,
}

impl Client {
    fn new(config: &ProviderConfig) -> Result<Self, ProviderError> {
        config.validate()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ProviderError::Backend(e.to_string()))?;
        Ok(Client { http, base: config.endpoint.trim_end_matches('/').to_string(), retries: config.retries })
    }

    fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(&self, path: &str, body: &Req) -> Result<Resp, ProviderError> {
        let url = format!("{}/{}", self.base, path);
        let mut last = ProviderError::Unreachable(url.clone());
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(50 * u64::from(attempt)));
            }
            match self.http.post(&url).json(body).send() {
                Ok(resp) if resp.status().is_server_error() => {
                    last = ProviderError::Unreachable(format!("{url}: HTTP {}", resp.status()));
                }
                Ok(resp) if !resp.status().is_success() => {
                    return Err(ProviderError::Backend(format!("{url}: HTTP {}", resp.status())));
                }
                Ok(resp) => return resp.json().map_err(|e| ProviderError::Backend(format!("{url}: {e}"))),
                Err(e) => last = ProviderError::Unreachable(format!("{url}: {e}")),
            }
        }
        Err(last)
    }
}

#[derive(Serialize)]
struct TranslateRequest<'a> {
    text: &'a str,
    src: LanguageCode,
    tgt: LanguageCode,
    context: &'a TranslationContext,
}

#[derive(Deserialize)]
struct TranslateResponse {
    text: String,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vector: Vec<f64>,
}

pub struct HttpTranslator {
    client: Client,
}

impl HttpTranslator {
    pub fn new(config: &ProviderConfig) -> Result<Self, ProviderError> {
        Ok(HttpTranslator { client: Client::new(config)? })
    }
}

impl Translator for HttpTranslator {
    fn translate(&self, text: &str, src: LanguageCode, tgt: LanguageCode, context: &TranslationContext) -> Result<String, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        let resp: TranslateResponse = self.client.post("translate", &TranslateRequest { text, src, tgt, context })?;
        if resp.text.trim().is_empty() {
            return Err(ProviderError::EmptyTranslation(text.to_string()));
        }
        Ok(resp.text)
    }
}

/// Embedding client; vectors from the service are normalized on receipt.
pub struct HttpEmbedder {
    client: Client,
}

impl HttpEmbedder {
    pub fn new(config: &ProviderConfig) -> Result<Self, ProviderError> {
        Ok(HttpEmbedder { client: Client::new(config)? })
    }
}

impl<T: Scalar> Embedder<T> for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector<T>, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        let resp: EmbedResponse = self.client.post("embed", &EmbedRequest { text })?;
        let values = resp
            .vector
            .into_iter()
            .map(|x| T::from_f64(x).ok_or_else(|| ProviderError::InvalidVector("component out of range".into())))
            .collect::<Result<Vec<T>, _>>()?;
        EmbeddingVector::normalized(values)
    }
}
