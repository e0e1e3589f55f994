//! Translation backends: the live chat-completion client and a rule-driven
//! mock, plus extraction of code from raw responses.

mod extract;
mod live;
mod mock;

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tracing::{debug, warn};

use crate::error::{Error, Result};
use crate::prompt::PromptEnvelope;
use crate::registry::Registry;

pub use extract::{extract_code, CodeExtraction, TODO_MARKER};
pub use live::LiveBackend;
pub use mock::{MockBackend, RepairMode, RewriteRule, RuleTable};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("backend error{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
pub struct BackendError {
    pub message: String,
    pub status: Option<u16>,
    pub retryable: bool,
}

impl BackendError {
    pub fn retryable(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            status: None,
            retryable: true,
        }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            status: None,
            retryable: false,
        }
    }
}

pub trait TranslationBackend: Send + Sync {
    fn name(&self) -> &str;
    /// One request; raw response text.
    fn complete(&self, envelope: &PromptEnvelope, config: &BackendConfig) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub endpoint: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub max_output_units: usize,
    pub retry_count: u32,
    pub timeout_secs: u64,
    pub api_key_env: String,
    /// Rule table for the mock backend.
    pub mock_rules: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            model: "gpt-4o".into(),
            temperature: 0.0,
            max_output_units: 4096,
            retry_count: 2,
            timeout_secs: 120,
            api_key_env: "OPENAI_API_KEY".into(),
            mock_rules: None,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(Error::Config(format!("temperature {} is outside [0, 2]", self.temperature)));
        }
        if self.timeout_secs == 0 {
            return Err(Error::Config("backend timeout must be positive".into()));
        }
        Ok(())
    }
}

pub fn prompt_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Sends `envelope`, retrying retryable failures up to `retry_count` times.
pub fn translate(backend: &dyn TranslationBackend, envelope: &PromptEnvelope, config: &BackendConfig) -> Result<String> {
    let hash = prompt_hash(&envelope.rendered_text);
    let mut attempt = 0;
    loop {
        let started = Instant::now();
        let outcome = backend.complete(envelope, config);
        let latency_ms = started.elapsed().as_millis();
        match outcome {
            Ok(text) => {
                debug!(backend = backend.name(), unit = %envelope.unit_id, prompt = %&hash[..16], latency_ms, response_chars = text.chars().count(), "backend call");
                return Ok(text);
            }
            Err(e) if e.retryable && attempt < config.retry_count => {
                warn!(backend = backend.name(), unit = %envelope.unit_id, prompt = %&hash[..16], latency_ms, attempt, error = %e, "retrying backend call");
                attempt += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
}

pub type BackendRegistry = Registry<BackendConfig, dyn TranslationBackend>;

/// Registry with the built-in `mock` and `live` backends.
pub fn backend_registry() -> BackendRegistry {
    let mut reg = BackendRegistry::new("backend");
    reg.register("mock", |c: &BackendConfig| {
        let rules = match &c.mock_rules {
            Some(path) => RuleTable::load(path)?,
            None => RuleTable::default(),
        };
        Ok(Box::new(MockBackend::try_new(rules)?) as Box<dyn TranslationBackend>)
    });
    reg.register("live", |c: &BackendConfig| {
        c.validate()?;
        Ok(Box::new(LiveBackend::new(c)?) as Box<dyn TranslationBackend>)
    });
    reg
}
