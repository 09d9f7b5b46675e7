use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::prompts::{system_prompt, user_message};
use super::{Backend, ReasoningError, ReasoningRequest, ReasoningResponse};

/// Connection settings for a chat-completion endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
}

fn default_timeout() -> f64 {
    30.0
}

impl RemoteConfig {
    /// Reads `TASKPOS_REMOTE_URL`, `TASKPOS_REMOTE_MODEL`,
    /// `TASKPOS_REMOTE_API_KEY` and `TASKPOS_REMOTE_TIMEOUT_S`.
    pub fn from_env() -> Result<Self, ReasoningError> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        let endpoint = var("TASKPOS_REMOTE_URL")
            .ok_or_else(|| ReasoningError::Transport("TASKPOS_REMOTE_URL is not set".into()))?;
        let timeout_s = match var("TASKPOS_REMOTE_TIMEOUT_S") {
            Some(t) => t
                .parse()
                .map_err(|_| ReasoningError::Transport(format!("bad TASKPOS_REMOTE_TIMEOUT_S {t:?}")))?,
            None => default_timeout(),
        };
        Ok(Self {
            endpoint,
            model: var("TASKPOS_REMOTE_MODEL").unwrap_or_else(|| "gpt-4o".into()),
            api_key: var("TASKPOS_REMOTE_API_KEY"),
            timeout_s,
        })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ReasoningError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ReasoningError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ReasoningError::Io(format!("{}: {e}", path.display())))
    }
}

/// Pulls the JSON text out of the first fenced block; falls back to the
/// whole reply when it has no fence.
pub fn extract_fenced_json(reply: &str) -> &str {
    let Some(open) = reply.find("```") else {
        return reply.trim();
    };
    let after = &reply[open + 3..];
    let body_start = after.find('\n').map_or(0, |i| i + 1);
    let body = &after[body_start..];
    match body.find("```") {
        Some(close) => body[..close].trim(),
        None => body.trim(),
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, ReasoningError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_s))
            .build()
            .map_err(|e| ReasoningError::Transport(e.to_string()))?;
        Ok(Self { config, client })
    }

    fn call(&self, req: &ReasoningRequest) -> Result<String, ReasoningError> {
        let role = req.payload.role();
        let body = json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": system_prompt(role)},
                {"role": "user", "content": user_message(&req.payload)},
            ],
        });
        let mut http = self.client.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.config.api_key {
            http = http.bearer_auth(key);
        }
        let resp = http.send().map_err(|e| {
            if e.is_timeout() {
                ReasoningError::Timeout(self.config.timeout_s)
            } else {
                ReasoningError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        let value: Value = resp.json().map_err(|e| ReasoningError::Transport(format!("{status}: {e}")))?;
        if !status.is_success() {
            return Err(ReasoningError::Transport(format!("{status}: {value}")));
        }
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ReasoningError::Schema { role: role.as_str(), detail: "reply has no message content".into() })
    }
}

impl Backend for RemoteBackend {
    fn name(&self) -> &'static str {
        "remote"
    }

    fn respond(&mut self, req: &ReasoningRequest) -> Result<ReasoningResponse, ReasoningError> {
        let role = req.payload.role();
        let schema = |detail: String| ReasoningError::Schema { role: role.as_str(), detail };
        let reply = self.call(req)?;
        let mut value: Value = serde_json::from_str(extract_fenced_json(&reply)).map_err(|e| schema(e.to_string()))?;
        let obj = value.as_object_mut().ok_or_else(|| schema("expected a JSON object".into()))?;
        obj.insert("role".into(), Value::String(role.as_str().into()));
        serde_json::from_value(value).map_err(|e| schema(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fenced_extraction() {
        assert_eq!(extract_fenced_json("sure\n```json\n{\"a\": 1}\n```\nbye"), "{\"a\": 1}");
        assert_eq!(extract_fenced_json("{\"a\": 1}"), "{\"a\": 1}");
        assert_eq!(extract_fenced_json("```\n{\"a\": 2}"), "{\"a\": 2}");
    }
}
