//! Test-time scaling harness built around two-phase "heavy thinking":
//! fan out K independent reasoning trajectories for a query, collect their
//! answer segments into a serialized memory cache, then run one or more
//! sequential deliberation passes that synthesize a final answer. The crate
//! also ships the evaluation metrics (M@K, P@K, V@K, HM@K, HP@K), pass-rate
//! bucket analysis, trajectory selection strategies, a tool-interleaved
//! generation loop, a readable skill document emitter for agentic harnesses,
//! and an RL-ready cache exporter.
//!
//! Start with the runnable examples (`cargo run --example <name>`); each one
//! demonstrates a single capability against the deterministic scripted mock
//! provider, so none of them needs network access or API keys.

pub mod cache;
pub mod deliberation;
pub mod metrics;
pub mod orchestrator;
pub mod provider;
pub mod rng;
pub mod selection;
pub mod skill;
pub mod tool_loop;
pub mod trajectory;

pub use cache::{
    build_cache, build_cache_with, extend_cache, render_deliberation_prompt, reshuffle,
    CacheBudget, CacheEntry, CacheError, EntryOrigin, MemoryCache, Pruning, TemplateStore,
    DEFAULT_TEMPLATE_ID,
};
pub use deliberation::{
    deliberate, iterate, DeliberationConfig, DeliberationError, DeliberationOutput,
    DeliberationRound, IterationResult, DEFAULT_DELIBERATION_FANOUT,
};
pub use metrics::{
    bucket_analysis, heavy_mean_at_k, heavy_pass_at_k, mean_at_k, pass_at_k, unbiased_pass_at_k,
    verify, vote_at_k, vote_winner, MetricsError, MetricsReport, PassRateBucket, QueryEvaluation,
    Verdict, VerdictRule,
};
pub use orchestrator::{
    export_rl_caches, load_dataset, run_benchmark, run_pipeline, FullReport, OrchestratorError,
    PipelineMode, ProviderSpec, RunConfig, Seeds,
};
pub use provider::{
    complete, complete_many, CompletionRequest, CompletionResult, FinishReason, HttpProvider,
    Message, MockMatcher, MockOutcome, MockRule, Provider, ProviderEndpoint, ProviderError,
    RetryPolicy, Role, SamplingParams, ScriptedMock, TokenUsage,
};
pub use selection::{diversity_distance, select, SelectionError, SelectionSpec, SelectionStrategy};
pub use skill::{emit_skill, validate_skill, SkillDocument, SkillFinding, SkillMetadata};
pub use tool_loop::{
    builtin_arithmetic_executor, external_command_executor, run_tool_interleaved, ToolCall,
    ToolError, ToolExchange, ToolExecutor, ToolLoopConfig, ToolResult,
};
pub use trajectory::{
    extract_answer, generate_parallel, split_thinking, split_thinking_with, DomainTag, Query,
    SlotFailure, Trajectory, TrajectoryError, TrajectorySet,
};
