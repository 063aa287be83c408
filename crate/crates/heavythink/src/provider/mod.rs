//! Uniform access to chat-completion model endpoints.
//!
//! Two [`Provider`] implementations ship with the crate: [`HttpProvider`]
//! speaks the OpenAI-compatible `POST {base_url}/chat/completions` wire
//! protocol, and [`ScriptedMock`] replays a deterministic script for tests
//! and offline runs. [`complete`] adds retries with exponential backoff and
//! full jitter; [`complete_many`] adds bounded concurrency with positional
//! result alignment.

mod http;
mod mock;

pub use http::HttpProvider;
pub use mock::{MockMatcher, MockOutcome, MockRule, RepeatMode, ScriptedMock};

use std::collections::BTreeMap;
use std::time::Duration;

use async_trait::async_trait;
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SplitMix64;

/// Configuration for one OpenAI-compatible HTTP endpoint.
///
/// API keys are never stored here; `api_key_env` names the environment
/// variable to read at request time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProviderEndpoint {
    pub base_url: String,
    pub model_id: String,
    /// Environment variable holding the bearer token, if any.
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// Per-request timeout in seconds.
    #[serde(default = "default_timeout_secs")]
    pub request_timeout_secs: f64,
    #[serde(default)]
    pub extra_headers: BTreeMap<String, String>,
    /// `top_k` is sent only when the endpoint advertises support for it.
    #[serde(default)]
    pub supports_top_k: bool,
    /// When true, `n_samples` is realized with the `n` request field;
    /// otherwise the gateway issues `n` independent single-sample requests.
    #[serde(default = "default_true")]
    pub supports_n: bool,
}

fn default_timeout_secs() -> f64 {
    120.0
}

fn default_true() -> bool {
    true
}

impl ProviderEndpoint {
    pub fn new(base_url: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_id: model_id.into(),
            api_key_env: None,
            request_timeout_secs: default_timeout_secs(),
            extra_headers: BTreeMap::new(),
            supports_top_k: false,
            supports_n: true,
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.base_url.is_empty() {
            return Err(ProviderError::InvalidRequest("base_url is empty".into()));
        }
        if self.request_timeout_secs <= 0.0 {
            return Err(ProviderError::InvalidRequest(
                "request_timeout must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Sampling parameters forwarded to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    #[serde(default)]
    pub top_k: Option<u32>,
    pub max_output_tokens: u32,
    #[serde(default)]
    pub seed: Option<i64>,
}

impl Default for SamplingParams {
    /// temperature 1.0, top_p 0.95, top_k 10.
    fn default() -> Self {
        Self {
            temperature: 1.0,
            top_p: 0.95,
            top_k: Some(10),
            max_output_tokens: 32_768,
            seed: None,
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.temperature < 0.0 {
            return Err(ProviderError::InvalidRequest(
                "temperature must be non-negative".into(),
            ));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ProviderError::InvalidRequest(
                "top_p must lie in (0, 1]".into(),
            ));
        }
        if self.max_output_tokens == 0 {
            return Err(ProviderError::InvalidRequest(
                "max_output_tokens must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
    pub fn tool(content: impl Into<String>) -> Self {
        Self { role: Role::Tool, content: content.into() }
    }
}

#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub messages: Vec<Message>,
    pub sampling: SamplingParams,
    pub n_samples: u32,
}

impl CompletionRequest {
    pub fn new(messages: Vec<Message>, sampling: SamplingParams, n_samples: u32) -> Self {
        Self { messages, sampling, n_samples }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.messages.is_empty() {
            return Err(ProviderError::InvalidRequest("messages is empty".into()));
        }
        let last = self.messages.last().expect("non-empty");
        if !matches!(last.role, Role::User | Role::Tool) {
            return Err(ProviderError::InvalidRequest(
                "last message role must be user or tool".into(),
            ));
        }
        if self.n_samples == 0 {
            return Err(ProviderError::InvalidRequest(
                "n_samples must be positive".into(),
            ));
        }
        self.sampling.validate()
    }

    /// Content of the last user message, used by mock match rules.
    pub fn last_user_content(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    ToolCall,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl TokenUsage {
    pub fn add(&mut self, other: TokenUsage) {
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
    }
}

/// Result of a completed (possibly retried) request.
#[derive(Debug, Clone)]
pub struct CompletionResult {
    pub texts: Vec<String>,
    pub finish_reasons: Vec<FinishReason>,
    /// Attempts consumed by the slowest wire request behind this result.
    pub attempts_used: u32,
    pub usage: TokenUsage,
}

/// One wire-level reply before retry accounting.
#[derive(Debug, Clone)]
pub struct RawReply {
    pub texts: Vec<String>,
    pub finish_reasons: Vec<FinishReason>,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Base delay in seconds for the first backoff.
    pub backoff_base_secs: f64,
    pub backoff_factor: f64,
}

impl Default for RetryPolicy {
    /// 3 attempts, base 1s, factor 2, full jitter.
    fn default() -> Self {
        Self { max_attempts: 3, backoff_base_secs: 1.0, backoff_factor: 2.0 }
    }
}

impl RetryPolicy {
    /// A policy that never sleeps, for tests.
    pub fn immediate(max_attempts: u32) -> Self {
        Self { max_attempts, backoff_base_secs: 0.0, backoff_factor: 1.0 }
    }

    fn delay_for(&self, attempt: u32, rng: &mut SplitMix64) -> Duration {
        let full = self.backoff_base_secs * self.backoff_factor.powi(attempt as i32 - 1);
        // Full jitter: uniform in [0, full].
        let jittered = full * rng.next_f64();
        Duration::from_secs_f64(jittered.max(0.0))
    }
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("all {attempts} attempts failed: {last_error}")]
    Exhausted { attempts: u32, last_error: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("HTTP status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("no mock rule matches request: {0}")]
    NoMatchingRule(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl ProviderError {
    /// Whether a retry may succeed. Auth failures and malformed replies are
    /// permanent; network errors and 429/5xx are transient.
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Transient(_) => true,
            ProviderError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// A chat-completion backend. One call is one wire request with no retries;
/// retry and fan-out policy live in [`complete`] and [`complete_many`].
#[async_trait]
pub trait Provider: Send + Sync {
    async fn send(&self, request: &CompletionRequest) -> Result<RawReply, ProviderError>;

    /// Whether `n_samples > 1` can be realized in one wire request.
    fn supports_n(&self) -> bool {
        true
    }
}

/// Issue a request with retries and exponential backoff.
///
/// Transient failures (network errors, HTTP 429/5xx) are retried up to
/// `retry.max_attempts`; auth failures and malformed replies are returned
/// immediately after the first attempt. When the provider cannot realize
/// `n_samples` in one wire request, `n` independent single-sample requests
/// are issued and stitched back together in slot order; `attempts_used` is
/// then the maximum over the sub-requests.
pub async fn complete(
    provider: &dyn Provider,
    request: &CompletionRequest,
    retry: &RetryPolicy,
) -> Result<CompletionResult, ProviderError> {
    request.validate()?;
    if request.n_samples > 1 && !provider.supports_n() {
        return complete_expanded(provider, request, retry).await;
    }
    complete_single(provider, request, retry).await
}

async fn complete_single(
    provider: &dyn Provider,
    request: &CompletionRequest,
    retry: &RetryPolicy,
) -> Result<CompletionResult, ProviderError> {
    let max_attempts = retry.max_attempts.max(1);
    let mut jitter = SplitMix64::new(jitter_seed());
    let mut last_error = String::new();
    for attempt in 1..=max_attempts {
        match provider.send(request).await {
            Ok(reply) => {
                if reply.texts.len() != reply.finish_reasons.len() {
                    return Err(ProviderError::Malformed(
                        "texts and finish_reasons length mismatch".into(),
                    ));
                }
                if reply.texts.len() != request.n_samples as usize {
                    return Err(ProviderError::Malformed(format!(
                        "expected {} choices, got {}",
                        request.n_samples,
                        reply.texts.len()
                    )));
                }
                return Ok(CompletionResult {
                    texts: reply.texts,
                    finish_reasons: reply.finish_reasons,
                    attempts_used: attempt,
                    usage: reply.usage,
                });
            }
            Err(err) if err.is_retryable() => {
                last_error = err.to_string();
                if attempt < max_attempts {
                    let delay = retry.delay_for(attempt, &mut jitter);
                    if !delay.is_zero() {
                        tokio::time::sleep(delay).await;
                    }
                }
            }
            Err(err) => return Err(err),
        }
    }
    Err(ProviderError::Exhausted { attempts: max_attempts, last_error })
}

async fn complete_expanded(
    provider: &dyn Provider,
    request: &CompletionRequest,
    retry: &RetryPolicy,
) -> Result<CompletionResult, ProviderError> {
    let n = request.n_samples as usize;
    let single = CompletionRequest {
        messages: request.messages.clone(),
        sampling: request.sampling.clone(),
        n_samples: 1,
    };
    let subresults = stream::iter((0..n).map(|_| complete_single(provider, &single, retry)))
        .buffered(n.min(8))
        .collect::<Vec<_>>()
        .await;
    let mut texts = Vec::with_capacity(n);
    let mut finish_reasons = Vec::with_capacity(n);
    let mut attempts_used = 0;
    let mut usage = TokenUsage::default();
    for sub in subresults {
        let sub = sub?;
        texts.extend(sub.texts);
        finish_reasons.extend(sub.finish_reasons);
        attempts_used = attempts_used.max(sub.attempts_used);
        usage.add(sub.usage);
    }
    Ok(CompletionResult { texts, finish_reasons, attempts_used, usage })
}

/// Issue many requests with at most `max_in_flight` awaiting a reply at any
/// instant. Results align positionally with `requests`; one request's
/// failure never aborts the others.
pub async fn complete_many(
    provider: &dyn Provider,
    requests: &[CompletionRequest],
    max_in_flight: usize,
    retry: &RetryPolicy,
) -> Vec<Result<CompletionResult, ProviderError>> {
    let width = max_in_flight.max(1);
    stream::iter(requests.iter().map(|r| complete(provider, r, retry)))
        .buffered(width)
        .collect()
        .await
}

/// Jitter seed for backoff delays. Delays affect timing only, never outputs,
/// so this seed intentionally varies run to run.
fn jitter_seed() -> u64 {
    use std::time::{SystemTime, UNIX_EPOCH};
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0x5eed)
}
