//! Remote text-completion client with an on-disk response cache, bounded concurrency and
//! retries.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::GatewayError;
use crate::io::sha256_hex;

pub const API_KEY_VAR: &str = "OPENAI_API_KEY";
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum BackendError {
    /// Worth retrying: connection failures, timeouts, server errors.
    Transient(String),
    RateLimited { retry_after: Option<Duration> },
    Fatal(String),
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, prompt: &str, n: usize, model: &str) -> Result<Vec<String>, BackendError>;
}

/// OpenAI-compatible `/completions` endpoint.
pub struct OpenAiBackend {
    base_url: String,
    api_key: String,
    client: reqwest::blocking::Client,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl OpenAiBackend {
    pub fn new(base_url: &str, api_key: String, timeout: Duration) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        Ok(OpenAiBackend {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            client,
            max_tokens: 5,
            temperature: 0.7,
        })
    }

    /// Reads the credential from the environment.
    pub fn from_env(base_url: &str, timeout: Duration) -> Result<Self, GatewayError> {
        let key = std::env::var(API_KEY_VAR)
            .map_err(|_| GatewayError::Config(format!("{API_KEY_VAR} is not set")))?;
        OpenAiBackend::new(base_url, key, timeout)
    }
}

impl CompletionBackend for OpenAiBackend {
    fn complete(&self, prompt: &str, n: usize, model: &str) -> Result<Vec<String>, BackendError> {
        let body = json!({
            "model": model,
            "prompt": prompt,
            "n": n,
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
        });
        let resp = self
            .client
            .post(format!("{}/completions", self.base_url))
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 {
            let retry_after = resp
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.parse::<u64>().ok())
                .map(Duration::from_secs);
            return Err(BackendError::RateLimited { retry_after });
        }
        if status.is_server_error() {
            return Err(BackendError::Transient(format!("server returned {status}")));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(BackendError::Fatal(format!("request rejected with {status}: {text}")));
        }
        let v: serde_json::Value = resp
            .json()
            .map_err(|e| BackendError::Transient(format!("malformed response: {e}")))?;
        let choices = v["choices"]
            .as_array()
            .ok_or_else(|| BackendError::Fatal("response has no choices".into()))?;
        Ok(choices
            .iter()
            .filter_map(|c| c["text"].as_str().map(String::from))
            .collect())
    }
}

/// One cached (or recorded) remote response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub model: String,
    pub n: usize,
    pub prompt: String,
    pub completions: Vec<String>,
}

pub fn cache_key(prompt: &str, n: usize, model: &str) -> String {
    let bytes = serde_json::to_vec(&(model, n, prompt)).expect("tuple serializes");
    sha256_hex(&bytes)
}

/// Serves responses from a recorded JSONL file; never touches the network.
pub struct ReplayBackend {
    records: HashMap<String, Vec<String>>,
}

impl ReplayBackend {
    pub fn new(records: impl IntoIterator<Item = CacheRecord>) -> Self {
        ReplayBackend {
            records: records.into_iter().map(|r| (r.key, r.completions)).collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let records = read_records(path.as_ref())?;
        Ok(ReplayBackend::new(records))
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&self, prompt: &str, n: usize, model: &str) -> Result<Vec<String>, BackendError> {
        self.records
            .get(&cache_key(prompt, n, model))
            .cloned()
            .ok_or_else(|| BackendError::Fatal("no recorded response for this prompt".into()))
    }
}

fn read_records(path: &Path) -> Result<Vec<CacheRecord>, GatewayError> {
    let file = File::open(path).map_err(|e| GatewayError::Cache(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| GatewayError::Cache(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<CacheRecord>(&line) {
            Ok(r) => out.push(r),
            // a torn final line from an interrupted run is tolerated
            Err(e) => warn!("{} line {}: skipping unreadable record: {e}", path.display(), i + 1),
        }
    }
    Ok(out)
}

/// Append-only JSONL cache; lookups are in memory, writes go through one lock.
pub struct ResponseCache {
    path: Option<PathBuf>,
    entries: Mutex<HashMap<String, Vec<String>>>,
    writer: Mutex<Option<File>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache {
            path: None,
            entries: Mutex::new(HashMap::new()),
            writer: Mutex::new(None),
        }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        if path.exists() {
            for r in read_records(&path)? {
                entries.insert(r.key, r.completions);
            }
        } else if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| GatewayError::Cache(e.to_string()))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| GatewayError::Cache(format!("{}: {e}", path.display())))?;
        Ok(ResponseCache {
            path: Some(path),
            entries: Mutex::new(entries),
            writer: Mutex::new(Some(file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<Vec<String>> {
        self.entries.lock().unwrap().get(key).cloned()
    }

    pub fn put(&self, record: CacheRecord) -> Result<(), GatewayError> {
        let mut writer = self.writer.lock().unwrap();
        if let Some(f) = writer.as_mut() {
            let mut line = serde_json::to_vec(&record).expect("record serializes");
            line.push(b'\n');
            f.write_all(&line)
                .and_then(|_| f.flush())
                .map_err(|e| GatewayError::Cache(e.to_string()))?;
        }
        self.entries
            .lock()
            .unwrap()
            .insert(record.key, record.completions);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: usize,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based): `base * 2^(attempt-1)`, capped.
    pub fn delay(&self, attempt: usize) -> Duration {
        let factor = 1u32 << (attempt.saturating_sub(1)).min(20);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Counting gate limiting requests in flight.
struct Gate {
    used: Mutex<usize>,
    freed: Condvar,
    max: usize,
}

impl Gate {
    fn acquire(&self) -> GatePass<'_> {
        let mut used = self.used.lock().unwrap();
        while *used >= self.max {
            used = self.freed.wait(used).unwrap();
        }
        *used += 1;
        GatePass(self)
    }
}

struct GatePass<'a>(&'a Gate);

impl Drop for GatePass<'_> {
    fn drop(&mut self) {
        *self.0.used.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

/// Takes the first alphabetic word of a completion, lowercased.
pub fn first_alphabetic_word(completion: &str) -> Option<String> {
    completion
        .split(|c: char| !c.is_alphabetic())
        .find(|w| !w.is_empty())
        .map(str::to_lowercase)
}

pub struct RemoteCompleter {
    backend: Box<dyn CompletionBackend>,
    model: String,
    cache: ResponseCache,
    retry: RetryPolicy,
    gate: Gate,
    network_calls: AtomicUsize,
}

impl RemoteCompleter {
    pub fn new(backend: Box<dyn CompletionBackend>, model: impl Into<String>, cache: ResponseCache) -> Self {
        RemoteCompleter {
            backend,
            model: model.into(),
            cache,
            retry: RetryPolicy::default(),
            gate: Gate {
                used: Mutex::new(0),
                freed: Condvar::new(),
                max: DEFAULT_MAX_IN_FLIGHT,
            },
            network_calls: AtomicUsize::new(0),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_in_flight(mut self, max: usize) -> Self {
        self.gate.max = max.max(1);
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    /// Backend calls made so far (cache hits excluded).
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    /// Raw completions, from the cache when available.
    pub fn complete_raw(&self, prompt: &str, n: usize) -> Result<Vec<String>, GatewayError> {
        if n == 0 {
            return Err(GatewayError::Input("n must be at least 1".into()));
        }
        let key = cache_key(prompt, n, &self.model);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit);
        }
        let mut last = String::new();
        for attempt in 1..=self.retry.max_attempts {
            let result = {
                let _pass = self.gate.acquire();
                self.network_calls.fetch_add(1, Ordering::SeqCst);
                self.backend.complete(prompt, n, &self.model)
            };
            let wait = match result {
                Ok(mut completions) => {
                    completions.truncate(n);
                    self.cache.put(CacheRecord {
                        key,
                        model: self.model.clone(),
                        n,
                        prompt: prompt.to_string(),
                        completions: completions.clone(),
                    })?;
                    return Ok(completions);
                }
                Err(BackendError::Fatal(m)) => return Err(GatewayError::Transport(m)),
                Err(BackendError::Transient(m)) => {
                    last = m;
                    self.retry.delay(attempt)
                }
                Err(BackendError::RateLimited { retry_after }) => {
                    last = "rate limited".into();
                    retry_after.unwrap_or_else(|| self.retry.delay(attempt)).min(self.retry.max_delay)
                }
            };
            if attempt < self.retry.max_attempts {
                warn!("remote attempt {attempt} failed ({last}); retrying in {wait:?}");
                std::thread::sleep(wait);
            }
        }
        Err(GatewayError::RetriesExhausted {
            attempts: self.retry.max_attempts,
            last,
        })
    }

    /// Post-processed completions: the first alphabetic word of each, lowercased.
    /// Completions without any word are dropped, so at most `n` words come back.
    pub fn complete(&self, prompt: &str, n: usize) -> Result<Vec<String>, GatewayError> {
        Ok(self
            .complete_raw(prompt, n)?
            .iter()
            .filter_map(|c| first_alphabetic_word(c))
            .collect())
    }
}
