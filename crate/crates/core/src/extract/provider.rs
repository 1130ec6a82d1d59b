//! Chat-completion providers.

use std::path::PathBuf;
use std::thread::sleep;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use crate::records::Task;

use super::PromptPair;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("no canned response for {conference_key}/{task}")]
    MissingResponse { conference_key: String, task: Task },
    #[error("environment variable {0} with the API token is not set")]
    MissingToken(String),
    #[error("provider request failed after {attempts} attempts: {message}")]
    Failed { attempts: u32, message: String },
    #[error("network access is disabled")]
    Offline,
}

/// One completion call: the prompt plus the key the mock provider uses.
#[derive(Debug, Clone)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a PromptPair,
    pub conference_key: &'a str,
}

pub trait Provider: Sync {
    /// Opaque model label recorded on every record.
    fn model(&self) -> &str;
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError>;
}

/// Replays `<dir>/<conference_key>/<task>.txt`.
#[derive(Debug, Clone)]
pub struct MockProvider {
    dir: PathBuf,
    model: String,
}

impl MockProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        MockProvider { dir: dir.into(), model: "mock".into() }
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }
}

impl Provider for MockProvider {
    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        let task = request.prompt.task;
        let path = self.dir.join(request.conference_key).join(format!("{}.txt", task.as_str()));
        std::fs::read_to_string(&path).map_err(|_| ProviderError::MissingResponse {
            conference_key: request.conference_key.to_string(),
            task,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireFormat {
    /// `POST {endpoint}` with `messages: [{role: system}, {role: user}]`,
    /// answer in `choices[0].message.content`.
    OpenaiChat,
    /// `POST {endpoint}` with top-level `system` and one user message,
    /// answer in `content[0].text`.
    AnthropicMessages,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub wire: WireFormat,
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API token.
    pub token_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_timeout() -> u64 {
    120
}

fn default_retries() -> u32 {
    3
}

fn default_max_tokens() -> u32 {
    4096
}

/// HTTP provider speaking one of the supported wire formats at temperature 0.
pub struct HttpProvider {
    config: ProviderConfig,
    token: String,
    client: reqwest::blocking::Client,
    backoff: Duration,
}

impl HttpProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        let token = std::env::var(&config.token_env).map_err(|_| ProviderError::MissingToken(config.token_env.clone()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| ProviderError::Failed { attempts: 0, message: e.to_string() })?;
        Ok(HttpProvider { config, token, client, backoff: Duration::from_millis(500) })
    }

    fn body(&self, prompt: &PromptPair) -> Json {
        match self.config.wire {
            WireFormat::OpenaiChat => json!({
                "model": self.config.model,
                "temperature": 0,
                "messages": [
                    {"role": "system", "content": prompt.system},
                    {"role": "user", "content": prompt.human},
                ],
            }),
            WireFormat::AnthropicMessages => json!({
                "model": self.config.model,
                "temperature": 0,
                "max_tokens": self.config.max_tokens,
                "system": prompt.system,
                "messages": [{"role": "user", "content": prompt.human}],
            }),
        }
    }

    fn send(&self, body: &Json) -> Result<String, (bool, String)> {
        let req = self.client.post(&self.config.endpoint).json(body);
        let req = match self.config.wire {
            WireFormat::OpenaiChat => req.bearer_auth(&self.token),
            WireFormat::AnthropicMessages => {
                req.header("x-api-key", &self.token).header("anthropic-version", "2023-06-01")
            }
        };
        let resp = req.send().map_err(|e| (true, e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let retry = status.is_server_error() || status.as_u16() == 429;
            return Err((retry, format!("HTTP {status}")));
        }
        let json: Json = resp.json().map_err(|e| (false, e.to_string()))?;
        extract_text(self.config.wire, &json).ok_or_else(|| (false, format!("unexpected response shape: {json}")))
    }
}

/// Pulls the completion text out of a provider response body.
pub fn extract_text(wire: WireFormat, body: &Json) -> Option<String> {
    let v = match wire {
        WireFormat::OpenaiChat => body.pointer("/choices/0/message/content"),
        WireFormat::AnthropicMessages => body.pointer("/content/0/text"),
    };
    v.and_then(Json::as_str).map(str::to_string)
}

impl Provider for HttpProvider {
    fn model(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        let body = self.body(request.prompt);
        let attempts = self.config.max_retries.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            match self.send(&body) {
                Ok(text) => return Ok(text),
                Err((retry, message)) => {
                    log::warn!("provider attempt {} failed: {message}", attempt + 1);
                    last = message;
                    if !retry {
                        return Err(ProviderError::Failed { attempts: attempt + 1, message: last });
                    }
                    if attempt + 1 < attempts {
                        sleep(self.backoff * 2u32.pow(attempt));
                    }
                }
            }
        }
        Err(ProviderError::Failed { attempts, message: last })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn response_shapes() {
        let oa = json!({"choices": [{"message": {"role": "assistant", "content": "a"}}]});
        let an = json!({"content": [{"type": "text", "text": "b"}]});
        assert_eq!(extract_text(WireFormat::OpenaiChat, &oa).as_deref(), Some("a"));
        assert_eq!(extract_text(WireFormat::AnthropicMessages, &an).as_deref(), Some("b"));
        assert_eq!(extract_text(WireFormat::OpenaiChat, &an), None);
    }

    #[test]
    fn missing_token_is_reported() {
        let cfg = ProviderConfig {
            wire: WireFormat::OpenaiChat,
            endpoint: "http://127.0.0.1:9/".into(),
            model: "m".into(),
            token_env: "CONFMETA_TEST_TOKEN_THAT_IS_NOT_SET".into(),
            timeout_secs: 1,
            max_retries: 3,
            max_tokens: 16,
        };
        assert!(matches!(HttpProvider::new(cfg), Err(ProviderError::MissingToken(_))));
    }
}
