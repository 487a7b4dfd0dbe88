//! Blocking client for chat-completions style HTTP endpoints.

use std::time::Duration;

use rand::Rng;
use reqwest::blocking::Response;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Backend, ClientError, DecodingParams, Source};
use crate::promptkit::PromptInstance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Total attempts, including the first one.
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay_ms: 500,
            max_delay_ms: 30_000,
        }
    }
}

impl RetryPolicy {
    /// Exponential backoff with jitter in `[d/2, d]`, `d = base * 2^(attempt-1)`
    /// capped at `max_delay_ms`. A server hint overrides the computed delay.
    fn delay(&self, attempt: u32, hint: Option<Duration>) -> Duration {
        let cap = Duration::from_millis(self.max_delay_ms);
        if let Some(hint) = hint {
            return hint.min(cap);
        }
        let exp = self
            .base_delay_ms
            .saturating_mul(1u64 << (attempt.saturating_sub(1)).min(32));
        let d = exp.min(self.max_delay_ms);
        let jittered = rand::thread_rng().gen_range(d / 2..=d);
        Duration::from_millis(jittered)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatClientConfig {
    /// Full URL of the completions route.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding a bearer token; no auth header when absent.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    60
}

pub struct ChatClient {
    http: reqwest::blocking::Client,
    config: ChatClientConfig,
    api_key: Option<String>,
}

impl ChatClient {
    pub fn new(config: ChatClientConfig) -> Result<Self, ClientError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .ok()
                    .filter(|v| !v.is_empty())
                    .ok_or_else(|| ClientError::MissingApiKey(var.clone()))?,
            ),
            None => None,
        };
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| ClientError::Network {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(ChatClient {
            http,
            config,
            api_key,
        })
    }

    /// Request body: the instruction as system message, the statement as user message.
    pub fn request_body(&self, instance: &PromptInstance, params: &DecodingParams) -> serde_json::Value {
        json!({
            "model": self.config.model,
            "messages": [
                { "role": "system", "content": instance.instruction },
                { "role": "user", "content": instance.statement },
            ],
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_tokens,
        })
    }

    fn send(&self, body: &serde_json::Value) -> reqwest::Result<Response> {
        let mut req = self.http.post(&self.config.endpoint).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        req.send()
    }
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

fn retry_hint(response: &Response) -> Option<Duration> {
    let headers = response.headers();
    if let Some(ms) = headers
        .get("retry-after-ms")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok())
    {
        return Some(Duration::from_millis(ms));
    }
    headers
        .get(reqwest::header::RETRY_AFTER)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<f64>().ok())
        .filter(|s| s.is_finite() && *s >= 0.0)
        .map(Duration::from_secs_f64)
}

fn parse_completion(bytes: &[u8]) -> Result<String, ClientError> {
    let parsed: CompletionResponse =
        serde_json::from_slice(bytes).map_err(|e| ClientError::Malformed(e.to_string()))?;
    parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| ClientError::Malformed("no choice with message content".into()))
}

impl Backend for ChatClient {
    fn source(&self) -> Source {
        Source::Live
    }

    fn generate(
        &self,
        instance: &PromptInstance,
        _sample_index: u32,
        params: &DecodingParams,
    ) -> Result<String, ClientError> {
        let body = self.request_body(instance, params);
        let policy = &self.config.retry;
        let attempts = policy.max_attempts.max(1);
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            let hint = match self.send(&body) {
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        let bytes = response.bytes().map_err(|e| ClientError::Malformed(e.to_string()))?;
                        return parse_completion(&bytes);
                    }
                    if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
                        return Err(ClientError::Auth(status.as_u16()));
                    }
                    let transient =
                        status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error();
                    let hint = retry_hint(&response);
                    let text = response.text().unwrap_or_default();
                    if !transient {
                        return Err(ClientError::Http {
                            status: status.as_u16(),
                            body: text,
                        });
                    }
                    last_error = format!("HTTP {}: {}", status.as_u16(), text);
                    hint
                }
                Err(e) => {
                    last_error = e.to_string();
                    None
                }
            };
            if attempt < attempts {
                std::thread::sleep(policy.delay(attempt, hint));
            }
        }
        Err(ClientError::Network {
            attempts,
            message: last_error,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_grows_and_caps() {
        let p = RetryPolicy {
            max_attempts: 5,
            base_delay_ms: 100,
            max_delay_ms: 1000,
        };
        for _ in 0..50 {
            let d1 = p.delay(1, None).as_millis();
            assert!((50..=100).contains(&d1));
            let d3 = p.delay(3, None).as_millis();
            assert!((200..=400).contains(&d3));
            let d10 = p.delay(10, None).as_millis();
            assert!((500..=1000).contains(&d10));
        }
        assert_eq!(p.delay(1, Some(Duration::from_secs(5))), Duration::from_millis(1000));
        assert_eq!(p.delay(1, Some(Duration::from_millis(20))), Duration::from_millis(20));
    }

    #[test]
    fn parses_first_choice() {
        let body = br#"{"choices":[{"message":{"role":"assistant","content":"Agree."}}]}"#;
        assert_eq!(parse_completion(body).unwrap(), "Agree.");
        assert!(matches!(parse_completion(b"{}"), Err(ClientError::Malformed(_))));
        assert!(matches!(
            parse_completion(br#"{"choices":[]}"#),
            Err(ClientError::Malformed(_))
        ));
    }
}
