//! Parallel reasoning fan-out and trajectory decomposition.
//!
//! [`generate_parallel`] spawns K mutually independent generations for one
//! query — every request carries the identical prompt, so no trajectory can
//! see another's output — and decomposes each completion into thinking
//! content, answer content, and an extracted final answer.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::{
    complete_many, CompletionRequest, FinishReason, Message, Provider, RetryPolicy,
    SamplingParams,
};
use crate::tool_loop::ToolExchange;

/// Default thinking delimiters: the de facto tag pair of open-weight
/// reasoning models. Override per model profile via [`split_thinking_with`].
pub const DEFAULT_THINK_OPEN: &str = "<think>";
pub const DEFAULT_THINK_CLOSE: &str = "</think>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainTag {
    Math,
    Code,
    General,
    MultipleChoice,
}

impl DomainTag {
    /// The output-format rule for this domain, shared by the thinker prompt,
    /// the deliberation prompt, and the emitted skill document.
    pub fn format_rule(&self) -> &'static str {
        match self {
            DomainTag::Math => "Put your final answer within \\boxed{}.",
            DomainTag::Code => "Present your final solution in a single fenced code block.",
            DomainTag::MultipleChoice => "Finish with the single letter of the correct option.",
            DomainTag::General => "State your final answer on the last line of your response.",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub text: String,
    #[serde(default)]
    pub reference_answer: Option<String>,
    pub domain_tag: DomainTag,
}

impl Query {
    pub fn new(query_id: impl Into<String>, text: impl Into<String>, domain_tag: DomainTag) -> Self {
        Self { query_id: query_id.into(), text: text.into(), reference_answer: None, domain_tag }
    }

    pub fn with_reference(mut self, reference: impl Into<String>) -> Self {
        self.reference_answer = Some(reference.into());
        self
    }
}

/// One independent reasoning attempt, decomposed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub trajectory_id: String,
    pub query_id: String,
    pub thinking: String,
    pub answer_content: String,
    pub extracted_answer: Option<String>,
    pub extraction_ok: bool,
    pub finish_reason: FinishReason,
    pub token_count: u64,
    #[serde(default)]
    pub tool_transcript: Vec<ToolExchange>,
    pub sampling: SamplingParams,
}

impl Trajectory {
    /// Build a trajectory from a raw completion by splitting thinking from
    /// answer content and extracting the final answer.
    pub fn from_completion(
        trajectory_id: impl Into<String>,
        query: &Query,
        raw: &str,
        finish_reason: FinishReason,
        token_count: u64,
        sampling: SamplingParams,
    ) -> Self {
        let (thinking, answer_content, _malformed) = split_thinking(raw);
        let (extracted_answer, extraction_ok) = extract_answer(&answer_content, query.domain_tag);
        Self {
            trajectory_id: trajectory_id.into(),
            query_id: query.query_id.clone(),
            thinking,
            answer_content,
            extracted_answer,
            extraction_ok,
            finish_reason,
            token_count,
            tool_transcript: Vec::new(),
            sampling,
        }
    }

    /// Character length of thinking plus answer content, the measure used by
    /// the max-length selection strategy.
    pub fn content_chars(&self) -> usize {
        self.thinking.chars().count() + self.answer_content.chars().count()
    }
}

/// A generation failure for one fan-out slot, kept so that partial failures
/// stay visible without aborting the surviving trajectories.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlotFailure {
    pub slot: usize,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectorySet {
    pub query_id: String,
    pub trajectories: Vec<Trajectory>,
    /// The requested fan-out K; equals `trajectories.len()` unless individual
    /// generations permanently failed.
    pub fan_out: u32,
    #[serde(default)]
    pub failures: Vec<SlotFailure>,
}

impl TrajectorySet {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("fan-out K must be at least 1")]
    InvalidFanout,
    #[error("all {attempted} generations failed; last error: {last_error}")]
    AllGenerationsFailed { attempted: usize, last_error: String },
}

/// The prompt the thinker sees: the problem statement plus the domain's
/// output-format rule. Identical for every trajectory of a query.
pub fn thinker_messages(query: &Query) -> Vec<Message> {
    vec![Message::user(format!("{}\n\n{}", query.text, query.domain_tag.format_rule()))]
}

/// Fan out K independent reasoning trajectories for `query`.
///
/// Individual permanent failures are recorded as [`SlotFailure`] markers and
/// the surviving trajectories are returned; only a total wipeout is an error.
pub async fn generate_parallel(
    query: &Query,
    k: u32,
    thinker: &dyn Provider,
    sampling: &SamplingParams,
    max_in_flight: usize,
    retry: &RetryPolicy,
) -> Result<TrajectorySet, TrajectoryError> {
    if k == 0 {
        return Err(TrajectoryError::InvalidFanout);
    }
    let messages = thinker_messages(query);
    let requests: Vec<CompletionRequest> = (0..k)
        .map(|_| CompletionRequest::new(messages.clone(), sampling.clone(), 1))
        .collect();
    let results = complete_many(thinker, &requests, max_in_flight, retry).await;

    let mut trajectories = Vec::new();
    let mut failures = Vec::new();
    for (slot, result) in results.into_iter().enumerate() {
        match result {
            Ok(completion) => {
                trajectories.push(Trajectory::from_completion(
                    format!("t{slot:03}"),
                    query,
                    &completion.texts[0],
                    completion.finish_reasons[0],
                    completion.usage.completion_tokens,
                    sampling.clone(),
                ));
            }
            Err(err) => failures.push(SlotFailure { slot, error: err.to_string() }),
        }
    }
    if trajectories.is_empty() {
        let last_error = failures.last().map(|f| f.error.clone()).unwrap_or_default();
        return Err(TrajectoryError::AllGenerationsFailed { attempted: k as usize, last_error });
    }
    Ok(TrajectorySet { query_id: query.query_id.clone(), trajectories, fan_out: k, failures })
}

/// Split raw model output into thinking and answer content using the default
/// `<think>`/`</think>` delimiters.
pub fn split_thinking(raw: &str) -> (String, String, bool) {
    split_thinking_with(raw, DEFAULT_THINK_OPEN, DEFAULT_THINK_CLOSE)
}

/// Split raw model output into (thinking, answer_content, malformed).
///
/// Thinking is the concatenation of all delimited segments; everything else
/// is answer content. Unbalanced delimiters set `malformed`: an unclosed
/// opener sends the tail to thinking, and a closer with no opener sends the
/// text before it to thinking (reasoning models sometimes omit the opening
/// tag when it was supplied by the prompt template).
pub fn split_thinking_with(raw: &str, open: &str, close: &str) -> (String, String, bool) {
    let mut thinking = String::new();
    let mut answer = String::new();
    let mut malformed = false;
    let mut rest = raw;
    loop {
        let next_open = rest.find(open);
        let next_close = rest.find(close);
        match (next_open, next_close) {
            (None, None) => {
                answer.push_str(rest);
                break;
            }
            // A closer before any opener: unbalanced.
            (open_at, Some(c)) if open_at.is_none_or(|o| c < o) => {
                thinking.push_str(&rest[..c]);
                rest = &rest[c + close.len()..];
                malformed = true;
            }
            (Some(o), _) => {
                answer.push_str(&rest[..o]);
                rest = &rest[o + open.len()..];
                match rest.find(close) {
                    Some(c) => {
                        thinking.push_str(&rest[..c]);
                        rest = &rest[c + close.len()..];
                    }
                    None => {
                        thinking.push_str(rest);
                        malformed = true;
                        break;
                    }
                }
            }
            (None, Some(_)) => unreachable!("covered by the closer-first arm"),
        }
    }
    (thinking, answer, malformed)
}

/// Extract the final answer from answer content under the domain convention.
///
/// Math takes the contents of the last `\boxed{...}` (brace-depth matched,
/// so nested LaTeX survives); code takes the body of the last fenced block;
/// multiple choice takes the last standalone option letter A-E; general
/// takes the last non-empty line. When the primary pattern is absent the
/// last non-empty line is used as a fallback and `extraction_ok` is false.
pub fn extract_answer(answer_content: &str, domain: DomainTag) -> (Option<String>, bool) {
    let primary = match domain {
        DomainTag::Math => last_boxed(answer_content),
        DomainTag::Code => last_code_fence(answer_content),
        DomainTag::MultipleChoice => last_option_letter(answer_content),
        DomainTag::General => last_nonempty_line(answer_content),
    };
    if let Some(answer) = primary {
        return (Some(answer), true);
    }
    match domain {
        DomainTag::General => (None, false),
        _ => match last_nonempty_line(answer_content) {
            Some(line) => (Some(line), false),
            None => (None, false),
        },
    }
}

/// Contents of the last `\boxed{...}` marker, matched by brace depth.
fn last_boxed(text: &str) -> Option<String> {
    const MARKER: &str = "\\boxed";
    let mut result = None;
    let mut search_from = 0;
    while let Some(found) = text[search_from..].find(MARKER) {
        let marker_at = search_from + found;
        let after = &text[marker_at + MARKER.len()..];
        let after_trimmed = after.trim_start();
        search_from = marker_at + MARKER.len();
        if !after_trimmed.starts_with('{') {
            continue;
        }
        let body_start = after.len() - after_trimmed.len() + 1;
        let mut depth = 1usize;
        let mut end = None;
        for (offset, ch) in after[body_start..].char_indices() {
            match ch {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(offset);
                        break;
                    }
                }
                _ => {}
            }
        }
        if let Some(end) = end {
            result = Some(after[body_start..body_start + end].trim().to_string());
        }
    }
    result
}

/// Body of the last complete ``` fenced block, info string stripped.
fn last_code_fence(text: &str) -> Option<String> {
    const FENCE: &str = "```";
    let mut fences = Vec::new();
    let mut from = 0;
    while let Some(found) = text[from..].find(FENCE) {
        fences.push(from + found);
        from += found + FENCE.len();
    }
    if fences.len() < 2 {
        return None;
    }
    // Complete blocks pair fences (0,1), (2,3), ...; take the last pair.
    let pairs = fences.len() / 2;
    let open = fences[(pairs - 1) * 2];
    let close = fences[(pairs - 1) * 2 + 1];
    let inner = &text[open + FENCE.len()..close];
    // Drop the info string (language tag) on the opening fence line.
    let body = match inner.find('\n') {
        Some(newline) => &inner[newline + 1..],
        None => "",
    };
    Some(body.trim_end_matches('\n').to_string())
}

/// Last standalone uppercase option letter A-E.
fn last_option_letter(text: &str) -> Option<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut result = None;
    for (i, &ch) in chars.iter().enumerate() {
        if !('A'..='E').contains(&ch) {
            continue;
        }
        let prev_ok = i == 0 || !chars[i - 1].is_alphanumeric();
        let next_ok = i + 1 == chars.len() || !chars[i + 1].is_alphanumeric();
        if prev_ok && next_ok {
            result = Some(ch.to_string());
        }
    }
    result
}

fn last_nonempty_line(text: &str) -> Option<String> {
    text.lines()
        .rev()
        .map(str::trim)
        .find(|line| !line.is_empty())
        .map(str::to_string)
}
