//! OpenAI-compatible chat completions, plus scripted models for tests.

use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Message {
        Message {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseFormat {
    JsonObject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub response_format: Option<ResponseFormat>,
    pub max_tokens: Option<u32>,
}

impl ChatRequest {
    /// A single user message at temperature 0.
    pub fn new(model: impl Into<String>, prompt: impl Into<String>) -> ChatRequest {
        ChatRequest {
            model: model.into(),
            messages: vec![Message::user(prompt)],
            temperature: 0.0,
            response_format: None,
            max_tokens: None,
        }
    }

    /// The `/chat/completions` request body. Unset options are omitted so the
    /// provider applies its defaults.
    pub fn body(&self) -> Json {
        let mut body = json!({
            "model": self.model,
            "messages": self.messages,
            "temperature": self.temperature,
        });
        if let Some(ResponseFormat::JsonObject) = self.response_format {
            body["response_format"] = json!({ "type": "json_object" });
        }
        if let Some(m) = self.max_tokens {
            body["max_tokens"] = json!(m);
        }
        body
    }

    fn prompt_bytes(&self) -> usize {
        self.messages.iter().map(|m| m.content.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl Usage {
    pub fn total(self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub content: String,
    pub usage: Usage,
    pub finish_reason: Option<String>,
    /// The provider reported no usage; `usage` holds [`estimate_tokens`]
    /// values instead.
    pub usage_estimated: bool,
}

/// Rough token count used when a provider omits usage: one token per four
/// bytes, rounded up.
pub fn estimate_tokens(text_bytes: usize) -> u64 {
    text_bytes.div_ceil(4) as u64
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("API error {status}: {body}")]
    Api { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("scripted model has no responses left")]
    ScriptExhausted,
}

/// Anything that answers chat requests. Implementations are shared across
/// worker threads.
pub trait ChatModel: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

#[derive(Debug, Clone)]
pub struct ClientOptions {
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Extra attempts after a transient failure (transport error, 429, 5xx).
    pub retries: u32,
    /// Delay before the first retry; doubled for each further retry.
    pub backoff: Duration,
}

impl ClientOptions {
    pub fn new(endpoint: impl Into<String>) -> ClientOptions {
        ClientOptions {
            endpoint: endpoint.into(),
            api_key: None,
            timeout: Duration::from_secs(120),
            retries: 3,
            backoff: Duration::from_millis(500),
        }
    }
}

/// Blocking client for an OpenAI-compatible endpoint.
#[derive(Debug, Clone)]
pub struct OpenAiClient {
    options: ClientOptions,
    http: reqwest::blocking::Client,
}

impl OpenAiClient {
    pub fn new(options: ClientOptions) -> Result<OpenAiClient, LlmError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(options.timeout)
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(OpenAiClient { options, http })
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.options.endpoint.trim_end_matches('/'))
    }

    fn send_once(&self, body: &Json) -> Result<Json, (LlmError, bool)> {
        let mut req = self.http.post(self.url()).json(body);
        if let Some(key) = &self.options.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| (LlmError::Transport(e.to_string()), true))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| (LlmError::Transport(e.to_string()), true))?;
        if !status.is_success() {
            let transient = status.as_u16() == 429 || status.is_server_error();
            return Err((
                LlmError::Api {
                    status: status.as_u16(),
                    body: text,
                },
                transient,
            ));
        }
        serde_json::from_str(&text).map_err(|e| (LlmError::Malformed(e.to_string()), false))
    }
}

impl ChatModel for OpenAiClient {
    /// Only the final successful response is returned, so usage from failed
    /// tries is never counted.
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let body = req.body();
        let mut delay = self.options.backoff;
        let mut attempt = 0;
        let json = loop {
            match self.send_once(&body) {
                Ok(json) => break json,
                Err((err, true)) if attempt < self.options.retries => {
                    attempt += 1;
                    log::warn!("{}: {err}; retry {attempt} of {} in {delay:?}", req.model, self.options.retries);
                    thread::sleep(delay);
                    delay *= 2;
                }
                Err((err, _)) => return Err(err),
            }
        };
        parse_completion(&json, req)
    }
}

fn parse_completion(json: &Json, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
    let choice = json
        .pointer("/choices/0")
        .ok_or_else(|| LlmError::Malformed("no choices in response".into()))?;
    let content = choice
        .pointer("/message/content")
        .and_then(Json::as_str)
        .ok_or_else(|| LlmError::Malformed("choice has no message content".into()))?
        .to_string();
    let finish_reason = choice
        .get("finish_reason")
        .and_then(Json::as_str)
        .map(str::to_string);
    let counts = json.get("usage").map(|u| {
        (
            u.get("prompt_tokens").and_then(Json::as_u64),
            u.get("completion_tokens").and_then(Json::as_u64),
        )
    });
    let (usage, usage_estimated) = match counts {
        Some((Some(prompt_tokens), Some(completion_tokens))) => (
            Usage {
                prompt_tokens,
                completion_tokens,
            },
            false,
        ),
        _ => (
            Usage {
                prompt_tokens: estimate_tokens(req.prompt_bytes()),
                completion_tokens: estimate_tokens(content.len()),
            },
            true,
        ),
    };
    Ok(ChatResponse {
        content,
        usage,
        finish_reason,
        usage_estimated,
    })
}

/// One canned reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scripted {
    pub content: String,
    pub usage: Usage,
}

impl Scripted {
    pub fn new(content: impl Into<String>, prompt_tokens: u64, completion_tokens: u64) -> Scripted {
        Scripted {
            content: content.into(),
            usage: Usage {
                prompt_tokens,
                completion_tokens,
            },
        }
    }

    fn response(self) -> ChatResponse {
        ChatResponse {
            content: self.content,
            usage: self.usage,
            finish_reason: Some("stop".into()),
            usage_estimated: false,
        }
    }
}

/// Replays a fixed list of replies in order, whatever the request.
#[derive(Debug, Default)]
pub struct ScriptedModel {
    script: Mutex<VecDeque<Scripted>>,
}

impl ScriptedModel {
    pub fn new(script: impl IntoIterator<Item = Scripted>) -> ScriptedModel {
        ScriptedModel {
            script: Mutex::new(script.into_iter().collect()),
        }
    }

    pub fn remaining(&self) -> usize {
        self.script.lock().expect("script lock").len()
    }
}

impl ChatModel for ScriptedModel {
    fn complete(&self, _req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        self.script
            .lock()
            .expect("script lock")
            .pop_front()
            .map(Scripted::response)
            .ok_or(LlmError::ScriptExhausted)
    }
}

/// Separate scripts per key, chosen from each request by a key function.
/// Useful when requests for different cases interleave across threads.
pub struct KeyedScriptedModel<F> {
    scripts: Mutex<HashMap<String, VecDeque<Scripted>>>,
    key: F,
}

impl<F: Fn(&ChatRequest) -> String + Send + Sync> KeyedScriptedModel<F> {
    pub fn new(scripts: HashMap<String, Vec<Scripted>>, key: F) -> Self {
        KeyedScriptedModel {
            scripts: Mutex::new(scripts.into_iter().map(|(k, v)| (k, v.into())).collect()),
            key,
        }
    }
}

impl<F: Fn(&ChatRequest) -> String + Send + Sync> ChatModel for KeyedScriptedModel<F> {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let key = (self.key)(req);
        self.scripts
            .lock()
            .expect("script lock")
            .get_mut(&key)
            .and_then(VecDeque::pop_front)
            .map(Scripted::response)
            .ok_or(LlmError::ScriptExhausted)
    }
}
