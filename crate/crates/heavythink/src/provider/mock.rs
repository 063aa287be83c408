//! Deterministic scripted provider for tests and offline runs.
//!
//! A script is an ordered list of rules. Each incoming request is matched
//! against the rules in order by substring of the last user message; the
//! first matching rule supplies the next outcome from its sequence. With a
//! fixed (script, seed, request sequence) the mock produces identical
//! outcomes on every run, and its transcript records every call for
//! assertions on prompts, call counts, and concurrency.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{
    CompletionRequest, FinishReason, Provider, ProviderError, RawReply, TokenUsage,
};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockMatcher {
    /// Matches every request.
    Any,
    /// Matches when the last user message contains the given substring.
    Substring(String),
}

impl MockMatcher {
    fn matches(&self, last_user: &str) -> bool {
        match self {
            MockMatcher::Any => true,
            MockMatcher::Substring(needle) => last_user.contains(needle),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockOutcome {
    /// Reply with this text and finish_reason=stop.
    Text(String),
    /// Reply with this text and an explicit finish reason.
    WithFinish { text: String, finish: FinishReason },
    /// Fail with a retryable transport error.
    Transient(String),
    /// Fail with a non-retryable auth error.
    Auth,
    /// Fail with a non-retryable malformed-response error.
    Malformed,
    /// Reply `hit` with probability `p`, else `miss`, drawn from the mock's
    /// seeded generator.
    Bernoulli { p: f64, hit: String, miss: String },
}

impl MockOutcome {
    pub fn text(text: impl Into<String>) -> Self {
        MockOutcome::Text(text.into())
    }

    pub fn transient(message: impl Into<String>) -> Self {
        MockOutcome::Transient(message.into())
    }

    pub fn tool_call(text: impl Into<String>) -> Self {
        MockOutcome::WithFinish { text: text.into(), finish: FinishReason::ToolCall }
    }
}

/// How a rule behaves after its outcome sequence is exhausted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepeatMode {
    /// Keep replaying the last outcome.
    HoldLast,
    /// Start over from the first outcome.
    Cycle,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockRule {
    pub matcher: MockMatcher,
    pub outcomes: Vec<MockOutcome>,
    pub repeat: RepeatMode,
}

impl MockRule {
    pub fn any() -> Self {
        Self { matcher: MockMatcher::Any, outcomes: Vec::new(), repeat: RepeatMode::HoldLast }
    }

    pub fn on(substring: impl Into<String>) -> Self {
        Self {
            matcher: MockMatcher::Substring(substring.into()),
            outcomes: Vec::new(),
            repeat: RepeatMode::HoldLast,
        }
    }

    pub fn text(mut self, text: impl Into<String>) -> Self {
        self.outcomes.push(MockOutcome::text(text));
        self
    }

    pub fn outcome(mut self, outcome: MockOutcome) -> Self {
        self.outcomes.push(outcome);
        self
    }

    pub fn outcomes(mut self, outcomes: Vec<MockOutcome>) -> Self {
        self.outcomes.extend(outcomes);
        self
    }

    pub fn cycle(mut self) -> Self {
        self.repeat = RepeatMode::Cycle;
        self
    }
}

/// One recorded call: the last user message, every message content in
/// conversation order, the sample count, and the outcome texts (or the
/// error string).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockCallRecord {
    pub last_user: String,
    pub message_contents: Vec<String>,
    pub n_samples: u32,
    pub outcome: Result<Vec<String>, String>,
}

struct MockState {
    cursors: Vec<usize>,
    rng: SplitMix64,
    transcript: Vec<MockCallRecord>,
}

/// Deterministic scripted chat provider.
pub struct ScriptedMock {
    rules: Vec<MockRule>,
    state: Mutex<MockState>,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
    calls: AtomicUsize,
    /// Cooperative yields per call, so tests can observe real concurrency.
    yields: usize,
    supports_n: bool,
}

impl ScriptedMock {
    pub fn new(rules: Vec<MockRule>, seed: u64) -> Self {
        assert!(!rules.is_empty(), "mock script must have at least one rule");
        let cursors = vec![0; rules.len()];
        Self {
            rules,
            state: Mutex::new(MockState {
                cursors,
                rng: SplitMix64::new(seed),
                transcript: Vec::new(),
            }),
            in_flight: AtomicUsize::new(0),
            peak_in_flight: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
            yields: 0,
            supports_n: true,
        }
    }

    /// Convenience: one Any rule that always returns `text`.
    pub fn always(text: impl Into<String>) -> Self {
        Self::new(vec![MockRule::any().text(text)], 0)
    }

    /// Insert `n` cooperative yield points inside each call so that bounded
    /// concurrency becomes observable through the in-flight gauge.
    pub fn with_yields(mut self, yields: usize) -> Self {
        self.yields = yields;
        self
    }

    /// Force the n-expansion path in [`super::complete`].
    pub fn without_n_support(mut self) -> Self {
        self.supports_n = false;
        self
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }

    pub fn transcript(&self) -> Vec<MockCallRecord> {
        self.state.lock().expect("mock state poisoned").transcript.clone()
    }

    fn next_outcome(&self, state: &mut MockState, rule_idx: usize) -> MockOutcome {
        let rule = &self.rules[rule_idx];
        let cursor = &mut state.cursors[rule_idx];
        let outcome = match rule.repeat {
            RepeatMode::HoldLast => {
                let idx = (*cursor).min(rule.outcomes.len() - 1);
                rule.outcomes[idx].clone()
            }
            RepeatMode::Cycle => rule.outcomes[*cursor % rule.outcomes.len()].clone(),
        };
        *cursor += 1;
        outcome
    }

    fn realize(
        &self,
        outcome: MockOutcome,
        rng: &mut SplitMix64,
    ) -> Result<(String, FinishReason), ProviderError> {
        match outcome {
            MockOutcome::Text(text) => Ok((text, FinishReason::Stop)),
            MockOutcome::WithFinish { text, finish } => Ok((text, finish)),
            MockOutcome::Transient(message) => Err(ProviderError::Transient(message)),
            MockOutcome::Auth => Err(ProviderError::Auth("scripted auth failure".into())),
            MockOutcome::Malformed => {
                Err(ProviderError::Malformed("scripted malformed reply".into()))
            }
            MockOutcome::Bernoulli { p, hit, miss } => {
                let draw = rng.next_f64();
                Ok((if draw < p { hit } else { miss }, FinishReason::Stop))
            }
        }
    }
}

#[async_trait]
impl Provider for ScriptedMock {
    async fn send(&self, request: &CompletionRequest) -> Result<RawReply, ProviderError> {
        let current = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak_in_flight.fetch_max(current, Ordering::SeqCst);
        for _ in 0..self.yields {
            tokio::task::yield_now().await;
        }

        let result = self.respond(request);

        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        self.calls.fetch_add(1, Ordering::SeqCst);
        result
    }

    fn supports_n(&self) -> bool {
        self.supports_n
    }
}

impl ScriptedMock {
    fn respond(&self, request: &CompletionRequest) -> Result<RawReply, ProviderError> {
        let last_user = request.last_user_content().unwrap_or("").to_string();
        let rule_idx = self
            .rules
            .iter()
            .position(|rule| rule.matcher.matches(&last_user));

        let mut state = self.state.lock().expect("mock state poisoned");
        let message_contents: Vec<String> =
            request.messages.iter().map(|m| m.content.clone()).collect();
        let Some(rule_idx) = rule_idx else {
            state.transcript.push(MockCallRecord {
                last_user: last_user.clone(),
                message_contents,
                n_samples: request.n_samples,
                outcome: Err("no matching rule".into()),
            });
            return Err(ProviderError::NoMatchingRule(last_user));
        };

        let mut texts = Vec::with_capacity(request.n_samples as usize);
        let mut finish_reasons = Vec::with_capacity(request.n_samples as usize);
        for _ in 0..request.n_samples {
            let outcome = self.next_outcome(&mut state, rule_idx);
            match self.realize(outcome, &mut state.rng) {
                Ok((text, finish)) => {
                    texts.push(text);
                    finish_reasons.push(finish);
                }
                Err(err) => {
                    state.transcript.push(MockCallRecord {
                        last_user,
                        message_contents,
                        n_samples: request.n_samples,
                        outcome: Err(err.to_string()),
                    });
                    return Err(err);
                }
            }
        }

        state.transcript.push(MockCallRecord {
            last_user,
            message_contents,
            n_samples: request.n_samples,
            outcome: Ok(texts.clone()),
        });

        // Synthetic but deterministic usage accounting: ~4 chars per token.
        let prompt_chars: usize = request.messages.iter().map(|m| m.content.chars().count()).sum();
        let completion_chars: usize = texts.iter().map(|t| t.chars().count()).sum();
        Ok(RawReply {
            texts,
            finish_reasons,
            usage: TokenUsage {
                prompt_tokens: (prompt_chars / 4) as u64,
                completion_tokens: (completion_chars / 4) as u64,
            },
        })
    }
}
