//! Chat-completions transport: a live HTTP client with retries, and a
//! scripted stub that records every request for offline tests.

use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".to_string(),
            content: content.into(),
        }
    }
}

/// Outbound request body; field set and order are the wire contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ChatResponse {
    pub choices: Vec<ChatChoice>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ChatChoice {
    pub message: ChatResponseMessage,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ChatResponseMessage {
    pub content: String,
}

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("auth token env var {0} is not set")]
    MissingAuth(String),
    #[error("request failed after {attempts} attempts: {last_error}")]
    Exhausted { attempts: u32, last_error: String },
    #[error("endpoint returned status {status}: {body}")]
    BadStatus { status: u16, body: String },
    #[error("response body is not a chat completion: {0}")]
    MalformedResponse(String),
    #[error("scripted transport ran out of responses after {0} requests")]
    ScriptExhausted(usize),
}

/// One request/response exchange, persisted as a JSONL line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Transcript {
    pub request: ChatRequest,
    pub response: String,
}

pub type SharedTranscripts = Arc<Mutex<Vec<Transcript>>>;

/// Something that can answer a chat request with assistant text.
pub trait ChatTransport: Send {
    fn complete(&mut self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// Live HTTP transport: POSTs the request body to the configured URL with a
/// bearer token and retries transient failures.
pub struct HttpTransport {
    url: String,
    token: String,
    retries: u32,
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    /// Fails fast when the auth env var is missing, before any request.
    pub fn new(
        base_url: &str,
        auth_env: &str,
        timeout_secs: u64,
        retries: u32,
    ) -> Result<Self, TransportError> {
        let token = std::env::var(auth_env)
            .map_err(|_| TransportError::MissingAuth(auth_env.to_string()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(timeout_secs))
            .build()
            .map_err(|e| TransportError::Exhausted {
                attempts: 0,
                last_error: e.to_string(),
            })?;
        Ok(HttpTransport {
            url: base_url.trim_end_matches('/').to_string(),
            token,
            retries,
            client,
        })
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&mut self, request: &ChatRequest) -> Result<String, TransportError> {
        let attempts = self.retries + 1;
        let mut last_error = String::new();
        for _ in 0..attempts {
            let sent = self
                .client
                .post(&self.url)
                .bearer_auth(&self.token)
                .json(request)
                .send();
            match sent {
                Ok(response) => {
                    let status = response.status();
                    let body = response.text().unwrap_or_default();
                    if !status.is_success() {
                        // Client errors will not improve on retry.
                        if status.is_client_error() {
                            return Err(TransportError::BadStatus {
                                status: status.as_u16(),
                                body,
                            });
                        }
                        last_error = format!("status {status}");
                        continue;
                    }
                    let parsed: ChatResponse = serde_json::from_str(&body)
                        .map_err(|e| TransportError::MalformedResponse(e.to_string()))?;
                    return parsed
                        .choices
                        .first()
                        .map(|c| c.message.content.clone())
                        .ok_or_else(|| {
                            TransportError::MalformedResponse("no choices".to_string())
                        });
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(TransportError::Exhausted {
            attempts,
            last_error,
        })
    }
}

/// Offline transport scripted with a fixed response sequence; records every
/// request body so tests can diff what was sent.
pub struct ScriptedTransport {
    responses: Vec<String>,
    cursor: usize,
    /// When the script is shorter than the run, loop over it instead of
    /// failing; recorded requests still show the full history.
    pub cycle: bool,
    pub recorded: Vec<ChatRequest>,
}

impl ScriptedTransport {
    pub fn new(responses: Vec<String>) -> Self {
        ScriptedTransport {
            responses,
            cursor: 0,
            cycle: false,
            recorded: Vec::new(),
        }
    }

    pub fn cycling(responses: Vec<String>) -> Self {
        ScriptedTransport {
            cycle: true,
            ..Self::new(responses)
        }
    }
}

impl ChatTransport for ScriptedTransport {
    fn complete(&mut self, request: &ChatRequest) -> Result<String, TransportError> {
        self.recorded.push(request.clone());
        if self.responses.is_empty() {
            return Err(TransportError::ScriptExhausted(self.recorded.len()));
        }
        let index = if self.cycle {
            self.cursor % self.responses.len()
        } else if self.cursor < self.responses.len() {
            self.cursor
        } else {
            return Err(TransportError::ScriptExhausted(self.recorded.len()));
        };
        self.cursor += 1;
        Ok(self.responses[index].clone())
    }
}

impl<T: ChatTransport + ?Sized> ChatTransport for Box<T> {
    fn complete(&mut self, request: &ChatRequest) -> Result<String, TransportError> {
        (**self).complete(request)
    }
}
