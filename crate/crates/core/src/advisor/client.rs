//! OpenAI-compatible chat-completion client with a content-addressed disk
//! cache and exponential backoff.

use std::fs::{self, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::AdvisorError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    Timeout,
    Other(String),
}

/// One HTTP POST. Implemented over reqwest; tests substitute counters.
pub trait ChatTransport {
    fn post(
        &self,
        url: &str,
        api_key: &str,
        body: &str,
        timeout: Duration,
    ) -> Result<TransportResponse, TransportError>;
}

#[derive(Debug, Default)]
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl ChatTransport for HttpTransport {
    fn post(
        &self,
        url: &str,
        api_key: &str,
        body: &str,
        timeout: Duration,
    ) -> Result<TransportResponse, TransportError> {
        let resp = self
            .client
            .post(url)
            .bearer_auth(api_key)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_string())
            .timeout(timeout)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    TransportError::Timeout
                } else {
                    TransportError::Other(e.to_string())
                }
            })?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Other(e.to_string())
            }
        })?;
        Ok(TransportResponse { status, body })
    }
}

/// Resolves a base URL to the chat-completions route.
pub fn completions_url(endpoint: &str) -> String {
    let base = endpoint.trim_end_matches('/');
    if base.ends_with("/chat/completions") {
        base.to_string()
    } else if base.ends_with("/v1") {
        format!("{base}/chat/completions")
    } else {
        format!("{base}/v1/chat/completions")
    }
}

pub fn cache_key(model: &str, prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(model.as_bytes());
    h.update([0u8]);
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    prompt: String,
    response: String,
    timestamp: u64,
    model: String,
}

/// Exclusive handle on a cache directory; the lock file is removed on drop.
#[derive(Debug)]
pub struct DiskCache {
    dir: PathBuf,
    lock: PathBuf,
}

impl DiskCache {
    pub const LOCK_FILE: &'static str = ".lock";

    pub fn open(dir: &Path) -> Result<Self, AdvisorError> {
        fs::create_dir_all(dir).map_err(|e| AdvisorError::io(dir, e))?;
        let lock = dir.join(Self::LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(_) => Ok(DiskCache {
                dir: dir.to_path_buf(),
                lock,
            }),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(AdvisorError::CacheLocked(lock)),
            Err(e) => Err(AdvisorError::io(&lock, e)),
        }
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str, model: &str, prompt: &str) -> Option<String> {
        let text = fs::read_to_string(self.path(key)).ok()?;
        let entry: CacheEntry = serde_json::from_str(&text).ok()?;
        (entry.model == model && entry.prompt == prompt).then_some(entry.response)
    }

    pub fn put(&self, key: &str, model: &str, prompt: &str, response: &str) -> Result<(), AdvisorError> {
        let entry = CacheEntry {
            prompt: prompt.to_string(),
            response: response.to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            model: model.to_string(),
        };
        let path = self.path(key);
        let tmp = self.dir.join(format!("{key}.json.tmp"));
        let text = serde_json::to_string_pretty(&entry).expect("cache entry serializes");
        fs::write(&tmp, text).map_err(|e| AdvisorError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| AdvisorError::io(&path, e))
    }
}

impl Drop for DiskCache {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

#[derive(Debug, Clone)]
pub struct ClientSettings {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff_base: Duration,
}

pub struct LlmClient {
    settings: ClientSettings,
    transport: Box<dyn ChatTransport>,
    cache: Option<DiskCache>,
}

impl LlmClient {
    pub fn new(settings: ClientSettings, transport: Box<dyn ChatTransport>, cache: Option<DiskCache>) -> Self {
        LlmClient {
            settings,
            transport,
            cache,
        }
    }

    pub fn model(&self) -> &str {
        &self.settings.model
    }

    /// Completion text for `prompt`, from the cache when possible.
    pub fn request(&self, prompt: &str) -> Result<String, AdvisorError> {
        let s = &self.settings;
        let key = cache_key(&s.model, prompt);
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key, &s.model, prompt)) {
            return Ok(hit);
        }
        let api_key = std::env::var(&s.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| AdvisorError::AuthMissing(s.api_key_env.clone()))?;
        let body = json!({
            "model": s.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        })
        .to_string();
        let url = completions_url(&s.endpoint);

        let mut attempt = 0;
        let text = loop {
            let outcome = self.transport.post(&url, &api_key, &body, s.timeout);
            let retryable = match &outcome {
                Ok(r) if (200..300).contains(&r.status) => break extract_content(&r.body)?,
                Ok(r) => r.status == 429 || r.status >= 500,
                Err(TransportError::Timeout) => true,
                Err(TransportError::Other(_)) => false,
            };
            if !retryable || attempt >= s.max_retries {
                let detail = match outcome {
                    Ok(r) => format!("status {}: {}", r.status, r.body.trim()),
                    Err(TransportError::Timeout) => "request timed out".to_string(),
                    Err(TransportError::Other(e)) => e,
                };
                return Err(AdvisorError::Http {
                    attempts: attempt + 1,
                    detail,
                });
            }
            std::thread::sleep(s.backoff_base * 2u32.saturating_pow(attempt));
            attempt += 1;
        };
        if let Some(c) = &self.cache {
            c.put(&key, &s.model, prompt, &text)?;
        }
        Ok(text)
    }
}

fn extract_content(body: &str) -> Result<String, AdvisorError> {
    let v: serde_json::Value =
        serde_json::from_str(body).map_err(|e| AdvisorError::MalformedResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| AdvisorError::MalformedResponse("no choices[0].message.content".into()))
}
