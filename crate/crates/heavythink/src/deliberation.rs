//! Sequential deliberation over a serialized memory cache, single-round or
//! iterated.
//!
//! One round renders the deliberation prompt from the cache and draws a
//! fan-out of independent generations from the deliberator. In iterated
//! mode the round-t cache consists of the round-(t-1) cache entries plus the
//! round-(t-1) outputs (pruned and budgeted like trajectories, labeled with
//! their round of origin), reshuffled under `base_seed + t`. Rounds are
//! strictly sequential; generations within a round run concurrently.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::{
    build_cache, extend_cache, render_deliberation_prompt, reshuffle, CacheAddition, CacheBudget,
    CacheError, MemoryCache, TemplateStore, DEFAULT_TEMPLATE_ID,
};
use crate::provider::{
    complete_many, CompletionRequest, Message, Provider, RetryPolicy, SamplingParams,
};
use crate::trajectory::{extract_answer, Query, TrajectorySet};

/// Default number of deliberation samples per round.
pub const DEFAULT_DELIBERATION_FANOUT: u32 = 4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeliberationConfig {
    /// Total number of rounds N.
    #[serde(default = "default_rounds")]
    pub rounds: u32,
    /// Fan-out per round; length must equal `rounds`.
    #[serde(default = "default_fanouts")]
    pub round_fanouts: Vec<u32>,
    #[serde(default)]
    pub sampling: SamplingParams,
    #[serde(default = "default_template_id")]
    pub template_id: String,
    /// Redraw the cache shuffle for every sample instead of fixing one
    /// shuffle per cache.
    #[serde(default)]
    pub reshuffle_per_sample: bool,
}

fn default_rounds() -> u32 {
    1
}

fn default_fanouts() -> Vec<u32> {
    vec![DEFAULT_DELIBERATION_FANOUT]
}

fn default_template_id() -> String {
    DEFAULT_TEMPLATE_ID.to_string()
}

impl Default for DeliberationConfig {
    /// One round of four samples.
    fn default() -> Self {
        Self {
            rounds: 1,
            round_fanouts: vec![DEFAULT_DELIBERATION_FANOUT],
            sampling: SamplingParams::default(),
            template_id: DEFAULT_TEMPLATE_ID.to_string(),
            reshuffle_per_sample: false,
        }
    }
}

impl DeliberationConfig {
    pub fn uniform(rounds: u32, fanout: u32) -> Self {
        Self {
            rounds,
            round_fanouts: vec![fanout; rounds as usize],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DeliberationError> {
        if self.rounds == 0 {
            return Err(DeliberationError::InvalidConfig("rounds must be at least 1".into()));
        }
        if self.round_fanouts.len() != self.rounds as usize {
            return Err(DeliberationError::InvalidConfig(format!(
                "round_fanouts has {} entries for {} rounds",
                self.round_fanouts.len(),
                self.rounds
            )));
        }
        if self.round_fanouts.contains(&0) {
            return Err(DeliberationError::InvalidConfig("all fan-outs must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeliberationOutput {
    pub output_id: String,
    /// 1-based round this output was generated in.
    pub round_index: u32,
    pub text: String,
    pub extracted_answer: Option<String>,
    pub extraction_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeliberationRound {
    pub round_index: u32,
    pub input_cache: MemoryCache,
    pub outputs: Vec<DeliberationOutput>,
}

/// Outcome of [`iterate`]: the completed rounds, plus a partial-result
/// marker when a round failed and aborted the remainder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationResult {
    pub rounds: Vec<DeliberationRound>,
    #[serde(default)]
    pub aborted_at: Option<IterationAbort>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationAbort {
    pub round_index: u32,
    pub error: String,
}

#[derive(Debug, Error)]
pub enum DeliberationError {
    #[error("memory cache has no entries")]
    EmptyCache,
    #[error("all {attempted} deliberation generations failed; last error: {last_error}")]
    AllGenerationsFailed { attempted: usize, last_error: String },
    #[error("invalid deliberation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

/// Draw `fanout` independent deliberation generations from the cache.
///
/// Individual failed generations are dropped as long as at least one sample
/// survives; a total wipeout is an error.
#[allow(clippy::too_many_arguments)]
pub async fn deliberate(
    cache: &MemoryCache,
    query: &Query,
    fanout: u32,
    deliberator: &dyn Provider,
    sampling: &SamplingParams,
    template_id: &str,
    templates: &TemplateStore,
    retry: &RetryPolicy,
) -> Result<Vec<DeliberationOutput>, DeliberationError> {
    run_round(RoundSpec {
        round_index: 1,
        cache,
        query,
        fanout,
        sampling,
        template_id,
        reshuffle_per_sample: false,
    }, deliberator, templates, retry)
    .await
}

struct RoundSpec<'a> {
    round_index: u32,
    cache: &'a MemoryCache,
    query: &'a Query,
    fanout: u32,
    sampling: &'a SamplingParams,
    template_id: &'a str,
    reshuffle_per_sample: bool,
}

async fn run_round(
    spec: RoundSpec<'_>,
    deliberator: &dyn Provider,
    templates: &TemplateStore,
    retry: &RetryPolicy,
) -> Result<Vec<DeliberationOutput>, DeliberationError> {
    if spec.cache.is_empty() {
        return Err(DeliberationError::EmptyCache);
    }
    let fanout = spec.fanout.max(1) as usize;

    let mut requests = Vec::with_capacity(fanout);
    if spec.reshuffle_per_sample {
        for sample in 0..fanout {
            let sample_seed = spec.cache.shuffle_seed.wrapping_add(1 + sample as u64);
            let shuffled = reshuffle(spec.cache, sample_seed);
            let prompt =
                render_deliberation_prompt(&shuffled, spec.query, spec.template_id, templates)?;
            requests.push(CompletionRequest::new(
                vec![Message::user(prompt)],
                spec.sampling.clone(),
                1,
            ));
        }
    } else {
        let prompt =
            render_deliberation_prompt(spec.cache, spec.query, spec.template_id, templates)?;
        for _ in 0..fanout {
            requests.push(CompletionRequest::new(
                vec![Message::user(prompt.clone())],
                spec.sampling.clone(),
                1,
            ));
        }
    }

    let results = complete_many(deliberator, &requests, fanout, retry).await;
    let mut outputs = Vec::new();
    let mut last_error = String::new();
    for (sample, result) in results.into_iter().enumerate() {
        match result {
            Ok(completion) => {
                let text = completion.texts[0].clone();
                let (_thinking, answer_content, _malformed) =
                    crate::trajectory::split_thinking(&text);
                let (extracted_answer, extraction_ok) =
                    extract_answer(&answer_content, spec.query.domain_tag);
                outputs.push(DeliberationOutput {
                    output_id: format!("r{}-o{:02}", spec.round_index, sample),
                    round_index: spec.round_index,
                    text,
                    extracted_answer,
                    extraction_ok,
                });
            }
            Err(err) => last_error = err.to_string(),
        }
    }
    if outputs.is_empty() {
        return Err(DeliberationError::AllGenerationsFailed { attempted: fanout, last_error });
    }
    Ok(outputs)
}

/// Run the full iterative deliberation loop over an initial trajectory set.
///
/// The round-1 cache is built from `initial_set` with shuffle seed
/// `base_seed + 1`; each later round-t cache extends the previous one with
/// the previous round's outputs and reshuffles with `base_seed + t`. A
/// failed round aborts the remainder and is recorded as a partial-result
/// marker rather than discarding the completed rounds.
#[allow(clippy::too_many_arguments)]
pub async fn iterate(
    query: &Query,
    initial_set: &TrajectorySet,
    config: &DeliberationConfig,
    deliberator: &dyn Provider,
    budget: &CacheBudget,
    base_seed: u64,
    templates: &TemplateStore,
    retry: &RetryPolicy,
) -> Result<IterationResult, DeliberationError> {
    config.validate()?;
    let mut cache = build_cache(initial_set, budget, base_seed.wrapping_add(1))?;
    let mut rounds: Vec<DeliberationRound> = Vec::new();
    let mut aborted_at = None;

    for t in 1..=config.rounds {
        let fanout = config.round_fanouts[(t - 1) as usize];
        let outcome = run_round(
            RoundSpec {
                round_index: t,
                cache: &cache,
                query,
                fanout,
                sampling: &config.sampling,
                template_id: &config.template_id,
                reshuffle_per_sample: config.reshuffle_per_sample,
            },
            deliberator,
            templates,
            retry,
        )
        .await;
        let outputs = match outcome {
            Ok(outputs) => outputs,
            Err(err) => {
                aborted_at = Some(IterationAbort { round_index: t, error: err.to_string() });
                break;
            }
        };
        rounds.push(DeliberationRound {
            round_index: t,
            input_cache: cache.clone(),
            outputs: outputs.clone(),
        });

        if t < config.rounds {
            let additions: Vec<CacheAddition> = outputs
                .iter()
                .map(|o| CacheAddition {
                    source_id: o.output_id.clone(),
                    raw_text: o.text.clone(),
                    round: t,
                })
                .collect();
            match extend_cache(&cache, &additions, budget, base_seed.wrapping_add(t as u64 + 1)) {
                Ok(extended) => cache = extended,
                Err(err) => {
                    aborted_at =
                        Some(IterationAbort { round_index: t + 1, error: err.to_string() });
                    break;
                }
            }
        }
    }

    Ok(IterationResult { rounds, aborted_at })
}
