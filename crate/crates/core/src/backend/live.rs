use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendConfig, BackendError, TranslationBackend};
use crate::error::{Error, Result};
use crate::knowledge::excerpt;
use crate::prompt::{ChatMessage, PromptEnvelope};

/// Chat-completion client over HTTP.
pub struct LiveBackend {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage>,
    temperature: f64,
    max_tokens: usize,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

impl LiveBackend {
    pub fn new(config: &BackendConfig) -> Result<Self> {
        let endpoint = config
            .endpoint
            .clone()
            .ok_or_else(|| Error::Config("live backend needs an endpoint".into()))?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            endpoint,
            api_key: std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty()),
            agent,
        })
    }
}

impl TranslationBackend for LiveBackend {
    fn name(&self) -> &str {
        "live"
    }

    fn complete(&self, envelope: &PromptEnvelope, config: &BackendConfig) -> Result<String, BackendError> {
        let body = ChatRequest {
            model: &config.model,
            messages: envelope.messages(),
            temperature: config.temperature,
            max_tokens: config.max_output_units,
        };
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| BackendError::retryable(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(BackendError {
                message: excerpt(&text),
                status: Some(status),
                retryable: status == 429 || status >= 500,
            });
        }
        let parsed: ChatResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::fatal(format!("malformed completion response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| BackendError::fatal("completion response has no choices"))
    }
}
