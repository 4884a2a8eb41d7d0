//! Live HTTP providers.
//!
//! - chat: OpenAI-compatible `chat/completions`
//! - image generation: `POST {prompt, num_images}` returning `{images: [{url}]}`
//! - image search: Custom-Search-style `GET ?q=&num=&searchType=image` returning `{items: [{link}]}`

use async_trait::async_trait;
use serde_json::{json, Value};

use super::{ChatRequest, ImageRef, ImageSource, Provider, ProviderError, ProviderErrorKind};

fn map_transport(err: reqwest::Error) -> ProviderError {
    if err.is_timeout() {
        ProviderError::new(ProviderErrorKind::Timeout, err.to_string())
    } else if let Some(status) = err.status() {
        ProviderError::status(status.as_u16(), err.to_string())
    } else {
        ProviderError::transport(err.to_string())
    }
}

async fn send_json(request: reqwest::RequestBuilder) -> Result<Value, ProviderError> {
    let response = request.send().await.map_err(map_transport)?;
    let status = response.status();
    if !status.is_success() {
        let body = response.text().await.unwrap_or_default();
        let snippet: String = body.chars().take(300).collect();
        return Err(ProviderError::status(
            status.as_u16(),
            format!("HTTP {status}: {snippet}"),
        ));
    }
    response
        .json::<Value>()
        .await
        .map_err(|e| ProviderError::invalid(format!("response is not JSON: {e}")))
}

fn unsupported(provider: &str, op: &str) -> ProviderError {
    ProviderError::invalid(format!("provider `{provider}` does not support {op}"))
}

fn images_from(urls: Vec<String>, source: ImageSource, query: &str) -> Vec<ImageRef> {
    urls.into_iter()
        .enumerate()
        .map(|(rank, url)| ImageRef {
            url,
            source,
            query: query.to_string(),
            rank: rank as u32,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct HttpChat {
    client: reqwest::Client,
    endpoint: String,
    api_key: Option<String>,
    model: String,
}

impl HttpChat {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, model: impl Into<String>) -> Self {
        HttpChat {
            client: reqwest::Client::new(),
            endpoint: endpoint.into(),
            api_key,
            model: model.into(),
        }
    }
}

#[async_trait]
impl Provider for HttpChat {
    fn name(&self) -> &str {
        "live-chat"
    }

    async fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let mut messages = vec![json!({"role": "system", "content": request.system_text})];
        messages.extend(
            request
                .history
                .iter()
                .map(|t| json!({"role": t.role.as_str(), "content": t.text})),
        );
        messages.push(json!({"role": "user", "content": request.user_text}));
        let body = json!({
            "model": self.model,
            "temperature": request.temperature,
            // roughly four characters per token
            "max_tokens": request.max_output_chars.div_ceil(4),
            "messages": messages,
        });
        let mut builder = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let value = send_json(builder).await?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ProviderError::invalid("no choices[0].message.content in chat response"))
    }

    async fn generate_images(&self, _: &str, _: usize) -> Result<Vec<ImageRef>, ProviderError> {
        Err(unsupported(self.name(), "generate_images"))
    }

    async fn search_images(&self, _: &str, _: usize) -> Result<Vec<ImageRef>, ProviderError> {
        Err(unsupported(self.name(), "search_images"))
    }
}

#[derive(Debug, Clone)]
pub struct HttpImageGeneration {
    client: reqwest::Client,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpImageGeneration {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        HttpImageGeneration {
            client: reqwest::Client::new(),
            endpoint: endpoint.into(),
            api_key,
        }
    }
}

#[async_trait]
impl Provider for HttpImageGeneration {
    fn name(&self) -> &str {
        "live-image-gen"
    }

    async fn complete(&self, _: &ChatRequest) -> Result<String, ProviderError> {
        Err(unsupported(self.name(), "complete"))
    }

    async fn generate_images(&self, prompt: &str, n: usize) -> Result<Vec<ImageRef>, ProviderError> {
        let mut builder = self
            .client
            .post(&self.endpoint)
            .json(&json!({"prompt": prompt, "num_images": n}));
        if let Some(key) = &self.api_key {
            builder = builder.header("Authorization", format!("Key {key}"));
        }
        let value = send_json(builder).await?;
        let urls: Vec<String> = value
            .get("images")
            .and_then(Value::as_array)
            .ok_or_else(|| ProviderError::invalid("no images array in generation response"))?
            .iter()
            .filter_map(|i| i.get("url").and_then(Value::as_str).map(str::to_string))
            .collect();
        Ok(images_from(urls, ImageSource::Generated, prompt))
    }

    async fn search_images(&self, _: &str, _: usize) -> Result<Vec<ImageRef>, ProviderError> {
        Err(unsupported(self.name(), "search_images"))
    }
}

#[derive(Debug, Clone)]
pub struct HttpImageSearch {
    client: reqwest::Client,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpImageSearch {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        HttpImageSearch {
            client: reqwest::Client::new(),
            endpoint: endpoint.into(),
            api_key,
        }
    }
}

#[async_trait]
impl Provider for HttpImageSearch {
    fn name(&self) -> &str {
        "live-image-search"
    }

    async fn complete(&self, _: &ChatRequest) -> Result<String, ProviderError> {
        Err(unsupported(self.name(), "complete"))
    }

    async fn generate_images(&self, _: &str, _: usize) -> Result<Vec<ImageRef>, ProviderError> {
        Err(unsupported(self.name(), "generate_images"))
    }

    async fn search_images(&self, query: &str, k: usize) -> Result<Vec<ImageRef>, ProviderError> {
        let num = k.to_string();
        let mut params = vec![("q", query), ("num", num.as_str()), ("searchType", "image")];
        if let Some(key) = &self.api_key {
            params.push(("key", key.as_str()));
        }
        let value = send_json(self.client.get(&self.endpoint).query(&params)).await?;
        let urls: Vec<String> = value
            .get("items")
            .and_then(Value::as_array)
            .map(|items| {
                items
                    .iter()
                    .filter_map(|i| i.get("link").and_then(Value::as_str).map(str::to_string))
                    .collect()
            })
            .unwrap_or_default();
        Ok(images_from(urls, ImageSource::Search, query))
    }
}
