//! Chat-completions client for OpenAI-compatible servers.

use std::path::Path;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use formbench_core::bench::RunConfig;
use formbench_core::client::{ChatClient, ChatMessage, ChatRequest, ClientError, ContentPart, Role};
use reqwest::StatusCode;
use serde_json::{json, Value};

use crate::RunnerError;

#[derive(Debug, Clone)]
pub struct OpenAiClient {
    http: reqwest::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

fn mime_for(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        _ => "image/png",
    }
}

fn message_json(msg: &ChatMessage) -> Result<Value, ClientError> {
    let role = match msg.role {
        Role::System => "system",
        Role::User => "user",
    };
    if let [ContentPart::Text { text }] = msg.parts.as_slice() {
        return Ok(json!({"role": role, "content": text}));
    }
    let mut content = Vec::with_capacity(msg.parts.len());
    for part in &msg.parts {
        match part {
            ContentPart::Text { text } => content.push(json!({"type": "text", "text": text})),
            ContentPart::Image { path, .. } => {
                let bytes = std::fs::read(path)
                    .map_err(|e| ClientError::Fatal(format!("reading {}: {e}", path.display())))?;
                let url = format!("data:{};base64,{}", mime_for(path), STANDARD.encode(bytes));
                content.push(json!({"type": "image_url", "image_url": {"url": url}}));
            }
        }
    }
    Ok(json!({"role": role, "content": content}))
}

/// The JSON body for one chat-completions call.
pub fn request_body(model: &str, request: &ChatRequest) -> Result<Value, ClientError> {
    let messages = request.messages.iter().map(message_json).collect::<Result<Vec<_>, _>>()?;
    let mut body = json!({
        "model": model,
        "messages": messages,
        "temperature": request.temperature(),
    });
    if request.json_response {
        body["response_format"] = json!({"type": "json_object"});
    }
    Ok(body)
}

fn classify_status(status: StatusCode, body: &str) -> ClientError {
    let msg = format!("HTTP {status}: {}", body.chars().take(200).collect::<String>());
    if status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS || status == StatusCode::REQUEST_TIMEOUT {
        ClientError::Transient(msg)
    } else {
        ClientError::Fatal(msg)
    }
}

impl OpenAiClient {
    pub fn new(config: &RunConfig) -> Result<Self, RunnerError> {
        config.validate()?;
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs.max(1)))
            .build()
            .map_err(|e| RunnerError::Http(e.to_string()))?;
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Ok(Self { http, endpoint: config.endpoint.clone(), model: config.model.clone(), api_key })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// One attempt, no retries. Network errors, timeouts, 408, 429 and
    /// 5xx are transient; everything else is fatal.
    pub async fn complete(&self, request: &ChatRequest) -> Result<String, ClientError> {
        let body = request_body(&self.model, request)?;
        let mut call = self.http.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let resp = call.send().await.map_err(|e| ClientError::Transient(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().await.map_err(|e| ClientError::Transient(e.to_string()))?;
        if !status.is_success() {
            return Err(classify_status(status, &text));
        }
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| ClientError::Fatal(format!("response is not JSON: {e}")))?;
        match &v["choices"][0]["message"]["content"] {
            Value::String(s) => Ok(s.clone()),
            Value::Null => Ok(String::new()),
            other => Err(ClientError::Fatal(format!("unexpected content: {other}"))),
        }
    }

    /// [`complete`](Self::complete) with the retry policy of `config`.
    pub async fn complete_with_retries(&self, request: &ChatRequest, config: &RunConfig) -> Result<String, ClientError> {
        let mut attempt = 0;
        loop {
            match self.complete(request).await {
                Ok(text) => return Ok(text),
                Err(e) if e.is_transient() && attempt + 1 < config.max_attempts => {
                    let delay = config.backoff(attempt, &mut rand::rng());
                    tokio::time::sleep(delay).await;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Synchronous wrapper for callers outside an async context, such as the
/// discovery stage.
pub struct BlockingClient {
    inner: OpenAiClient,
    config: RunConfig,
    runtime: tokio::runtime::Runtime,
}

impl BlockingClient {
    pub fn new(config: &RunConfig) -> Result<Self, RunnerError> {
        let runtime = tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .map_err(RunnerError::Io)?;
        Ok(Self { inner: OpenAiClient::new(config)?, config: config.clone(), runtime })
    }
}

impl ChatClient for BlockingClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, ClientError> {
        self.runtime.block_on(self.inner.complete_with_retries(request, &self.config))
    }
}
