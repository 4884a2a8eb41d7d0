//! Digest-keyed record/replay fixtures.
//!
//! A fixture is keyed by the SHA-256 of `{"op": <operation>, "request": <canonical request>}`
//! serialized with sorted keys. On disk each fixture is `<dir>/<digest>.json`.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{ChatRequest, ImageRef, ImageSource, Operation, Provider, ProviderError, ProviderErrorKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub op: Operation,
    pub request: Value,
    pub response: Value,
}

/// Serialize with object keys sorted at every level.
pub fn canonical_json(value: &Value) -> String {
    fn sort(value: &Value) -> Value {
        match value {
            Value::Object(map) => {
                let sorted: BTreeMap<&String, Value> = map.iter().map(|(k, v)| (k, sort(v))).collect();
                let mut out = serde_json::Map::new();
                for (k, v) in sorted {
                    out.insert(k.clone(), v);
                }
                Value::Object(out)
            }
            Value::Array(items) => Value::Array(items.iter().map(sort).collect()),
            other => other.clone(),
        }
    }
    sort(value).to_string()
}

pub fn chat_key(request: &ChatRequest) -> Value {
    let mut key = json!({
        "system_text": request.system_text,
        "user_text": request.user_text,
        "max_output_chars": request.max_output_chars,
        "temperature": request.temperature,
    });
    if !request.history.is_empty() {
        key["history"] = json!(request.history);
    }
    key
}

pub fn generate_key(prompt: &str, n: usize) -> Value {
    json!({ "prompt": prompt, "n": n })
}

pub fn search_key(query: &str, k: usize) -> Value {
    json!({ "query": query, "k": k })
}

pub fn digest(op: Operation, request: &Value) -> String {
    let text = canonical_json(&json!({ "op": op.as_str(), "request": request }));
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Fixture lookup over an optional directory plus in-memory entries.
#[derive(Debug, Clone, Default)]
pub struct FixtureStore {
    dir: Option<PathBuf>,
    memory: Arc<RwLock<HashMap<String, Fixture>>>,
}

impl FixtureStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn dir(path: impl Into<PathBuf>) -> Self {
        FixtureStore {
            dir: Some(path.into()),
            memory: Arc::default(),
        }
    }

    pub fn directory(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn insert(&self, op: Operation, request: Value, response: Value) -> String {
        let key = digest(op, &request);
        self.memory
            .write()
            .expect("fixture lock")
            .insert(key.clone(), Fixture { op, request, response });
        key
    }

    pub fn insert_chat(&self, request: &ChatRequest, text: &str) -> String {
        self.insert(Operation::Complete, chat_key(request), Value::String(text.to_string()))
    }

    pub fn insert_images(&self, op: Operation, request: Value, urls: &[&str]) -> String {
        self.insert(op, request, json!(urls))
    }

    /// Write a fixture file into the store directory.
    pub fn write(&self, op: Operation, request: Value, response: Value) -> std::io::Result<String> {
        let key = digest(op, &request);
        let Some(dir) = &self.dir else {
            self.insert(op, request, response);
            return Ok(key);
        };
        std::fs::create_dir_all(dir)?;
        let fixture = Fixture { op, request, response };
        let text = serde_json::to_string_pretty(&fixture).map_err(std::io::Error::other)?;
        std::fs::write(dir.join(format!("{key}.json")), text + "\n")?;
        Ok(key)
    }

    pub fn lookup(&self, op: Operation, request: &Value) -> Result<Option<Fixture>, ProviderError> {
        let key = digest(op, request);
        if let Some(f) = self.memory.read().expect("fixture lock").get(&key) {
            return Ok(Some(f.clone()));
        }
        let Some(dir) = &self.dir else { return Ok(None) };
        let path = dir.join(format!("{key}.json"));
        match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| ProviderError::invalid(format!("corrupt fixture {}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(ProviderError::transport(format!("reading {}: {e}", path.display()))),
        }
    }

    fn require(&self, op: Operation, request: &Value) -> Result<Fixture, ProviderError> {
        self.lookup(op, request)?.ok_or_else(|| {
            let digest = digest(op, request);
            ProviderError::new(
                ProviderErrorKind::FixtureMissing { digest: digest.clone() },
                format!("no {op} fixture for digest {digest}"),
            )
        })
    }
}

fn image_list(response: &Value, source: ImageSource, query: &str) -> Result<Vec<ImageRef>, ProviderError> {
    let items = response
        .as_array()
        .ok_or_else(|| ProviderError::invalid("image fixture must be an array"))?;
    items
        .iter()
        .enumerate()
        .map(|(rank, item)| {
            let url = match item {
                Value::String(s) => s.clone(),
                Value::Object(o) => o
                    .get("url")
                    .and_then(Value::as_str)
                    .ok_or_else(|| ProviderError::invalid("image fixture entry lacks url"))?
                    .to_string(),
                _ => return Err(ProviderError::invalid("image fixture entry must be a string or object")),
            };
            Ok(ImageRef {
                url,
                source,
                query: query.to_string(),
                rank: rank as u32,
            })
        })
        .collect()
}

/// Replays fixtures. Chat and generation misses are errors; an unknown
/// search query yields no results.
#[derive(Debug, Clone)]
pub struct MockProvider {
    store: FixtureStore,
}

impl MockProvider {
    pub fn new(store: FixtureStore) -> Self {
        MockProvider { store }
    }

    pub fn store(&self) -> &FixtureStore {
        &self.store
    }
}

#[async_trait]
impl Provider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    async fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let fixture = self.store.require(Operation::Complete, &chat_key(request))?;
        fixture
            .response
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ProviderError::invalid("chat fixture response must be a string"))
    }

    async fn generate_images(&self, prompt: &str, n: usize) -> Result<Vec<ImageRef>, ProviderError> {
        let fixture = self
            .store
            .require(Operation::GenerateImages, &generate_key(prompt, n))?;
        image_list(&fixture.response, ImageSource::Generated, prompt)
    }

    async fn search_images(&self, query: &str, k: usize) -> Result<Vec<ImageRef>, ProviderError> {
        match self.store.lookup(Operation::SearchImages, &search_key(query, k))? {
            Some(fixture) => image_list(&fixture.response, ImageSource::Search, query),
            None => Ok(Vec::new()),
        }
    }
}

/// Passes calls through to `inner` and writes every successful response into
/// the fixture store, so a live session can later be replayed by [`MockProvider`].
pub struct RecordingProvider {
    inner: Arc<dyn Provider>,
    store: FixtureStore,
}

impl RecordingProvider {
    pub fn new(inner: Arc<dyn Provider>, store: FixtureStore) -> Self {
        RecordingProvider { inner, store }
    }

    fn record(&self, op: Operation, request: Value, response: Value) {
        if let Err(e) = self.store.write(op, request, response) {
            tracing::warn!(error = %e, %op, "failed to record fixture");
        }
    }
}

fn urls(images: &[ImageRef]) -> Value {
    Value::Array(images.iter().map(|i| Value::String(i.url.clone())).collect())
}

#[async_trait]
impl Provider for RecordingProvider {
    fn name(&self) -> &str {
        "recording"
    }

    async fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let text = self.inner.complete(request).await?;
        self.record(Operation::Complete, chat_key(request), Value::String(text.clone()));
        Ok(text)
    }

    async fn generate_images(&self, prompt: &str, n: usize) -> Result<Vec<ImageRef>, ProviderError> {
        let images = self.inner.generate_images(prompt, n).await?;
        self.record(Operation::GenerateImages, generate_key(prompt, n), urls(&images));
        Ok(images)
    }

    async fn search_images(&self, query: &str, k: usize) -> Result<Vec<ImageRef>, ProviderError> {
        let images = self.inner.search_images(query, k).await?;
        self.record(Operation::SearchImages, search_key(query, k), urls(&images));
        Ok(images)
    }
}
