//! Provider abstraction for chat completion, image generation and image
//! search, with bounded retries, per-attempt timeouts and a per-provider
//! concurrency cap.

pub mod config;
pub mod http;
pub mod mock;
pub mod synthetic;

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

pub use config::{GatewayConfig, ProviderConfig, ProviderKind};
pub use mock::{FixtureStore, MockProvider, RecordingProvider};

pub const DEFAULT_CONCURRENCY: usize = 4;
pub const MAX_GENERATED_IMAGES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_text: String,
    pub user_text: String,
    pub max_output_chars: u32,
    pub temperature: f32,
    /// Earlier turns of a conversation, oldest first, sent between the system and user text.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<ChatTurn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: Role,
    pub text: String,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.system_text.trim().is_empty() || self.user_text.trim().is_empty() {
            return Err(GatewayError::Precondition("chat texts must be non-empty".into()));
        }
        if self.max_output_chars == 0 {
            return Err(GatewayError::Precondition("max_output_chars must be positive".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GatewayError::Precondition("temperature must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageSource {
    Search,
    Generated,
    User,
}

/// A reference to an image: a URL or content address plus how it was obtained.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageRef {
    pub url: String,
    pub source: ImageSource,
    /// Search query or generation prompt that produced the image.
    pub query: String,
    pub rank: u32,
}

/// Which gateway operation an error belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Complete,
    GenerateImages,
    SearchImages,
}

impl Operation {
    pub fn as_str(self) -> &'static str {
        match self {
            Operation::Complete => "complete",
            Operation::GenerateImages => "generate_images",
            Operation::SearchImages => "search_images",
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderErrorKind {
    Transport,
    Timeout,
    Status { code: u16 },
    FixtureMissing { digest: String },
    InvalidResponse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{message}")]
pub struct ProviderError {
    pub kind: ProviderErrorKind,
    pub message: String,
}

impl ProviderError {
    pub fn new(kind: ProviderErrorKind, message: impl Into<String>) -> Self {
        ProviderError {
            kind,
            message: message.into(),
        }
    }

    pub fn transport(message: impl Into<String>) -> Self {
        Self::new(ProviderErrorKind::Transport, message)
    }

    pub fn status(code: u16, message: impl Into<String>) -> Self {
        Self::new(ProviderErrorKind::Status { code }, message)
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(ProviderErrorKind::InvalidResponse, message)
    }

    /// Transport failures, timeouts, 429 and 5xx are retried; 4xx and
    /// fixture misses are not.
    pub fn is_retryable(&self) -> bool {
        match self.kind {
            ProviderErrorKind::Transport | ProviderErrorKind::Timeout => true,
            ProviderErrorKind::Status { code } => code == 429 || code >= 500,
            ProviderErrorKind::FixtureMissing { .. } | ProviderErrorKind::InvalidResponse => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    Precondition(String),
    #[error("{operation} failed after {attempts} attempt(s): {source}")]
    Provider {
        operation: Operation,
        attempts: u32,
        #[source]
        source: ProviderError,
    },
}

impl GatewayError {
    pub fn attempts(&self) -> u32 {
        match self {
            GatewayError::Precondition(_) => 0,
            GatewayError::Provider { attempts, .. } => *attempts,
        }
    }
}

/// One backend able to serve some or all gateway operations.
#[async_trait]
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;

    async fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError>;

    async fn generate_images(&self, prompt: &str, n: usize) -> Result<Vec<ImageRef>, ProviderError>;

    async fn search_images(&self, query: &str, k: usize) -> Result<Vec<ImageRef>, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub retries: u32,
    pub timeout: Duration,
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            retries: 2,
            timeout: Duration::from_secs(60),
            backoff: Duration::from_millis(200),
        }
    }
}

#[derive(Clone)]
struct Route {
    provider: Arc<dyn Provider>,
    policy: RetryPolicy,
    permits: Arc<Semaphore>,
}

impl Route {
    fn new(provider: Arc<dyn Provider>, policy: RetryPolicy, concurrency: usize) -> Self {
        Route {
            provider,
            policy,
            permits: Arc::new(Semaphore::new(concurrency.max(1))),
        }
    }

    async fn call<T, F, Fut>(&self, operation: Operation, mut attempt: F) -> Result<T, GatewayError>
    where
        F: FnMut(Arc<dyn Provider>) -> Fut,
        Fut: std::future::Future<Output = Result<T, ProviderError>>,
    {
        let mut attempts = 0;
        loop {
            attempts += 1;
            let result = {
                let _permit = self.permits.acquire().await.expect("semaphore never closed");
                match tokio::time::timeout(self.policy.timeout, attempt(self.provider.clone())).await {
                    Ok(r) => r,
                    Err(_) => Err(ProviderError::new(
                        ProviderErrorKind::Timeout,
                        format!("no response within {} ms", self.policy.timeout.as_millis()),
                    )),
                }
            };
            match result {
                Ok(value) => return Ok(value),
                Err(err) if err.is_retryable() && attempts <= self.policy.retries => {
                    tracing::warn!(provider = self.provider.name(), %operation, attempts, error = %err, "retrying");
                    if !self.policy.backoff.is_zero() {
                        tokio::time::sleep(self.policy.backoff * 2u32.saturating_pow(attempts - 1)).await;
                    }
                }
                Err(source) => {
                    return Err(GatewayError::Provider {
                        operation,
                        attempts,
                        source,
                    })
                }
            }
        }
    }
}

/// Shareable front door to the configured providers.
#[derive(Clone)]
pub struct Gateway {
    chat: Route,
    image_generation: Route,
    image_search: Route,
}

impl Gateway {
    /// Same provider and policy for all three operations.
    pub fn single(provider: Arc<dyn Provider>, policy: RetryPolicy) -> Self {
        Self::new(
            (provider.clone(), policy),
            (provider.clone(), policy),
            (provider, policy),
            DEFAULT_CONCURRENCY,
        )
    }

    pub fn new(
        chat: (Arc<dyn Provider>, RetryPolicy),
        image_generation: (Arc<dyn Provider>, RetryPolicy),
        image_search: (Arc<dyn Provider>, RetryPolicy),
        concurrency: usize,
    ) -> Self {
        Gateway {
            chat: Route::new(chat.0, chat.1, concurrency),
            image_generation: Route::new(image_generation.0, image_generation.1, concurrency),
            image_search: Route::new(image_search.0, image_search.1, concurrency),
        }
    }

    /// Replay-only gateway over a fixture store.
    pub fn mock(store: FixtureStore) -> Self {
        Self::single(
            Arc::new(MockProvider::new(store)),
            RetryPolicy {
                retries: 0,
                timeout: Duration::from_secs(10),
                backoff: Duration::ZERO,
            },
        )
    }

    pub async fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        request.validate()?;
        self.chat
            .call(Operation::Complete, |p| async move { p.complete(request).await })
            .await
    }

    /// Exactly `n` generated images ranked `0..n`.
    pub async fn generate_images(&self, prompt: &str, n: usize) -> Result<Vec<ImageRef>, GatewayError> {
        if prompt.trim().is_empty() {
            return Err(GatewayError::Precondition("prompt must be non-empty".into()));
        }
        if !(1..=MAX_GENERATED_IMAGES).contains(&n) {
            return Err(GatewayError::Precondition(format!(
                "image count must be in 1..={MAX_GENERATED_IMAGES}, got {n}"
            )));
        }
        let images = self
            .image_generation
            .call(Operation::GenerateImages, |p| async move {
                let images = p.generate_images(prompt, n).await?;
                if images.len() != n {
                    return Err(ProviderError::invalid(format!(
                        "requested {n} images, provider returned {}",
                        images.len()
                    )));
                }
                Ok(images)
            })
            .await?;
        Ok(normalize_batch(images, ImageSource::Generated, prompt))
    }

    /// Up to `k` search results ranked `0..`; no results is an empty list.
    pub async fn search_images(&self, query: &str, k: usize) -> Result<Vec<ImageRef>, GatewayError> {
        if query.trim().is_empty() {
            return Err(GatewayError::Precondition("query must be non-empty".into()));
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut images = self
            .image_search
            .call(
                Operation::SearchImages,
                |p| async move { p.search_images(query, k).await },
            )
            .await?;
        images.truncate(k);
        Ok(normalize_batch(images, ImageSource::Search, query))
    }
}

fn normalize_batch(images: Vec<ImageRef>, source: ImageSource, query: &str) -> Vec<ImageRef> {
    images
        .into_iter()
        .enumerate()
        .map(|(rank, image)| ImageRef {
            url: image.url,
            source,
            query: query.to_string(),
            rank: rank as u32,
        })
        .collect()
}
