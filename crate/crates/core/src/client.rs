//! Provider-neutral chat request shape and the client trait that the
//! discovery stage and the benchmark runner talk to.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentPart {
    Text { text: String },
    Image { path: PathBuf, dpi: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub parts: Vec<ContentPart>,
}

impl ChatMessage {
    pub fn text(role: Role, text: impl Into<String>) -> Self {
        Self { role, parts: vec![ContentPart::Text { text: text.into() }] }
    }

    /// Concatenated text parts.
    pub fn joined_text(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                ContentPart::Text { text } => Some(text.as_str()),
                ContentPart::Image { .. } => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// A single chat-completion call. Temperature is always zero and the
/// provider is asked for a JSON object response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub json_response: bool,
}

impl ChatRequest {
    pub fn new(messages: Vec<ChatMessage>) -> Self {
        Self { messages, json_response: true }
    }

    pub fn temperature(&self) -> f64 {
        0.0
    }

    /// All text content of the request, for inspection and tests.
    pub fn all_text(&self) -> String {
        self.messages.iter().map(ChatMessage::joined_text).collect::<Vec<_>>().join("\n")
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("request failed: {0}")]
    Fatal(String),
}

impl ClientError {
    pub fn is_transient(&self) -> bool {
        matches!(self, ClientError::Transient(_))
    }
}

/// Something that turns a chat request into the model's raw text reply.
pub trait ChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, ClientError>;
}

impl<F> ChatClient for F
where
    F: Fn(&ChatRequest) -> Result<String, ClientError>,
{
    fn complete(&self, request: &ChatRequest) -> Result<String, ClientError> {
        self(request)
    }
}
