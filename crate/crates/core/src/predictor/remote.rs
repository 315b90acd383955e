//! Client for a completion-style HTTP endpoint.
//!
//! Protocol: `POST {endpoint}` with JSON `{"prompt", "temperature",
//! "max_tokens"}` and a bearer token; the reply is JSON `{"text"}`. The
//! completion is read with [`parse_output`], so plain completions without
//! markers work.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::{CellValue, Context};
use crate::serializer::{parse_output, serialize};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteLlmConfig {
    pub endpoint: String,
    /// Name of the environment variable holding the bearer token.
    pub auth_env: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_ms: u64,
    /// Extra attempts after the first one.
    pub retries: u32,
    /// Initial backoff between attempts; doubles each retry.
    pub backoff_ms: u64,
    /// Prompts longer than this many characters are refused locally.
    pub max_prompt_chars: usize,
    pub max_in_flight: usize,
}

impl RemoteLlmConfig {
    pub fn new(endpoint: impl Into<String>, auth_env: impl Into<String>) -> Self {
        RemoteLlmConfig {
            endpoint: endpoint.into(),
            auth_env: auth_env.into(),
            temperature: 0.0,
            max_tokens: 64,
            timeout_ms: 30_000,
            retries: 2,
            backoff_ms: 200,
            max_prompt_chars: 8_192,
            max_in_flight: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.endpoint.is_empty() {
            return Err(Error::config("remote endpoint is empty"));
        }
        if self.auth_env.is_empty() {
            return Err(Error::config("remote backend needs an auth environment variable name"));
        }
        if self.timeout_ms == 0 {
            return Err(Error::config("remote timeout must be positive"));
        }
        if self.max_in_flight == 0 || self.max_prompt_chars == 0 {
            return Err(Error::config("remote limits must be positive"));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
}

/// Counting semaphore capping concurrent requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn acquire(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().expect("gate lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("gate lock");
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("gate lock") += 1;
        self.0.cv.notify_one();
    }
}

pub struct RemoteClient {
    cfg: RemoteLlmConfig,
    token: String,
    agent: ureq::Agent,
    gate: Gate,
}

impl RemoteClient {
    /// Reads the token from the configured environment variable.
    pub fn new(cfg: RemoteLlmConfig) -> Result<Self> {
        cfg.validate()?;
        let token = std::env::var(&cfg.auth_env)
            .map_err(|_| Error::config(format!("environment variable {} is not set", cfg.auth_env)))?;
        Ok(Self::with_token(cfg, token))
    }

    pub fn with_token(cfg: RemoteLlmConfig, token: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = Gate { free: Mutex::new(cfg.max_in_flight.max(1)), cv: Condvar::new() };
        RemoteClient { cfg, token: token.into(), agent, gate }
    }

    pub fn config(&self) -> &RemoteLlmConfig {
        &self.cfg
    }

    pub fn predict(&self, context: &Context, query: &CellValue) -> Result<Option<CellValue>> {
        let prompt = serialize(context, query)?;
        let len = prompt.as_str().chars().count();
        if len > self.cfg.max_prompt_chars {
            return Err(Error::OversizePrompt { len, limit: self.cfg.max_prompt_chars });
        }
        let text = self.complete(prompt.as_str())?;
        Ok(parse_output(&text))
    }

    /// Sends one prompt, retrying transport failures, 429 and 5xx.
    pub fn complete(&self, prompt: &str) -> Result<String> {
        let body = serde_json::to_string(&CompletionRequest {
            prompt,
            temperature: self.cfg.temperature,
            max_tokens: self.cfg.max_tokens,
        })
        .expect("request serializes");
        let _slot = self.gate.acquire();
        let mut last = Error::Remote { status: 0, body: "no attempt made".into() };
        for attempt in 0..=self.cfg.retries {
            if attempt > 0 {
                let wait = self.cfg.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(wait));
            }
            let sent = self
                .agent
                .post(&self.cfg.endpoint)
                .header("Authorization", &format!("Bearer {}", self.token))
                .content_type("application/json")
                .send(body.as_str());
            let mut resp = match sent {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("remote request failed (attempt {}): {e}", attempt + 1);
                    last = Error::Remote { status: 0, body: e.to_string() };
                    continue;
                }
            };
            let status = resp.status().as_u16();
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            if (200..300).contains(&status) {
                return serde_json::from_str::<CompletionResponse>(&text)
                    .map(|r| r.text)
                    .map_err(|e| Error::Remote { status, body: format!("malformed response: {e}") });
            }
            last = Error::Remote { status, body: text };
            if status != 429 && status < 500 {
                break;
            }
            log::warn!("remote endpoint returned {status} (attempt {})", attempt + 1);
        }
        Err(last)
    }
}
