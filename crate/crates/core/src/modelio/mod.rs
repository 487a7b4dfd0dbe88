//! Obtaining raw responses: a live chat-completions endpoint, a replay store,
//! or a synthetic respondent, plus the concurrent job runner.

mod http;
mod runner;
mod store;
mod synth;

use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use http::{ChatClient, ChatClientConfig, RetryPolicy};
pub use runner::{run_jobs, JobError, RunOptions, RunStats};
pub use store::{ResponseStore, StoreError};
pub use synth::{synth_respond, ProfileError, SyntheticProfile, SyntheticRespondent, REFUSAL_TEXT};

use crate::promptkit::{PromptInstance, PromptKey};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams {
            temperature: 1.0,
            top_p: 0.9,
            max_tokens: 64,
        }
    }
}

impl DecodingParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(format!("top_p must lie in (0, 1], got {}", self.top_p));
        }
        if self.max_tokens == 0 {
            return Err("max_tokens must be positive".into());
        }
        Ok(())
    }
}

/// Identity of one sampled response: the prompt plus the sample index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResponseKey {
    #[serde(flatten)]
    pub prompt: PromptKey,
    pub sample_index: u32,
}

impl ResponseKey {
    pub fn new(prompt: PromptKey, sample_index: u32) -> Self {
        ResponseKey {
            prompt,
            sample_index,
        }
    }
}

impl fmt::Display for ResponseKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.prompt, self.sample_index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Live,
    Cache,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawResponse {
    #[serde(flatten)]
    pub key: ResponseKey,
    pub text: String,
    pub source: Source,
    pub timestamp: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("network failure after {attempts} attempts: {message}")]
    Network { attempts: u32, message: String },
    #[error("authentication failed (HTTP {0})")]
    Auth(u16),
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed completion response: {0}")]
    Malformed(String),
    #[error("replay miss for {0}")]
    ReplayMiss(ResponseKey),
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Something that can produce a fresh response for a prompt.
pub trait Backend: Send + Sync {
    fn source(&self) -> Source;

    fn generate(
        &self,
        instance: &PromptInstance,
        sample_index: u32,
        params: &DecodingParams,
    ) -> Result<String, ClientError>;
}

/// Store-first client: a stored response is returned without touching the
/// backend; a missing one is generated, persisted, then returned. Without a
/// backend the client is in strict replay mode and a miss is an error.
pub struct Client {
    backend: Option<Box<dyn Backend>>,
}

impl Client {
    pub fn new(backend: Box<dyn Backend>) -> Self {
        Client {
            backend: Some(backend),
        }
    }

    pub fn replay_only() -> Self {
        Client { backend: None }
    }

    pub fn complete(
        &self,
        instance: &PromptInstance,
        sample_index: u32,
        params: &DecodingParams,
        store: &Mutex<ResponseStore>,
    ) -> Result<RawResponse, ClientError> {
        let key = ResponseKey::new(instance.key.clone(), sample_index);
        if let Some(hit) = store.lock().expect("store lock").get(&key) {
            return Ok(RawResponse {
                source: Source::Cache,
                ..hit.clone()
            });
        }
        let backend = self
            .backend
            .as_ref()
            .ok_or_else(|| ClientError::ReplayMiss(key.clone()))?;
        let text = backend.generate(instance, sample_index, params)?;
        let record = RawResponse {
            key,
            text,
            source: backend.source(),
            timestamp: now_rfc3339(),
        };
        store.lock().expect("store lock").insert(record.clone())?;
        Ok(record)
    }
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{StatementBundle, VariantKind};
    use crate::promptkit::{default_templates, render_prompt, LabelOrder};
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting(AtomicUsize);

    impl Backend for Counting {
        fn source(&self) -> Source {
            Source::Live
        }
        fn generate(&self, _: &PromptInstance, i: u32, _: &DecodingParams) -> Result<String, ClientError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(format!("agree {i}"))
        }
    }

    fn instance() -> PromptInstance {
        let b = StatementBundle {
            id: "s".into(),
            country: "nl".into(),
            text: "a".into(),
            paraphrases: vec!["b".into(), "c".into(), "d".into()],
            negation: "e".into(),
            opposite: "f".into(),
            domain_annotations: vec![],
        };
        render_prompt(&default_templates()[0], LabelOrder::Canonical, &b, VariantKind::Original).unwrap()
    }

    #[test]
    fn replay_hit_makes_no_backend_call() {
        let inst = instance();
        let store = Mutex::new(ResponseStore::in_memory());
        let live = Client::new(Box::new(Counting(AtomicUsize::new(0))));
        let first = live.complete(&inst, 0, &DecodingParams::default(), &store).unwrap();
        assert_eq!(first.source, Source::Live);

        let replay = Client::replay_only();
        let hit = replay.complete(&inst, 0, &DecodingParams::default(), &store).unwrap();
        assert_eq!(hit.text, first.text);
        assert_eq!(hit.source, Source::Cache);
        assert!(matches!(
            replay.complete(&inst, 1, &DecodingParams::default(), &store),
            Err(ClientError::ReplayMiss(_))
        ));
    }

    #[test]
    fn decoding_params_validation() {
        assert!(DecodingParams::default().validate().is_ok());
        assert!(DecodingParams { top_p: 0.0, ..Default::default() }.validate().is_err());
        assert!(DecodingParams { top_p: 1.5, ..Default::default() }.validate().is_err());
        assert!(DecodingParams { temperature: -0.1, ..Default::default() }.validate().is_err());
        assert!(DecodingParams { max_tokens: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn key_serializes_flat() {
        let key = ResponseKey::new(instance().key, 3);
        let v = serde_json::to_value(&key).unwrap();
        assert_eq!(v["template_id"], "t1");
        assert_eq!(v["label_order"], "canonical");
        assert_eq!(v["variant"], "original");
        assert_eq!(v["sample_index"], 3);
    }
}
