//! Serialized memory cache: the bridge between parallel reasoning and
//! sequential deliberation.
//!
//! Building a cache prunes each trajectory down to its answer content
//! (serializing full thinking traces would blow the context window),
//! enforces a character budget, shuffles the entries under a named seed so
//! the deliberator cannot develop positional bias, and renders everything
//! into one serialized text block. Budgeting is character-based rather than
//! token-based so results are tokenizer-independent; a rule of thumb is
//! `max_total_chars ≈ 3 ×` the intended token budget.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SplitMix64;
use crate::trajectory::{split_thinking, Query, TrajectorySet};

/// Directive phrases the deliberation prompt and the emitted skill document
/// must carry. Detection is lexical and case-insensitive.
pub mod directives {
    pub const CLASSIFY: &str = "classify the query type";
    pub const CRITIQUE: &str = "critically evaluate";
    pub const REDERIVE: &str = "re-derive";
    pub const CONSISTENCY: &str = "language and format consistency";
    pub const NO_CONCAT: &str = "superficial concatenation";

    pub const ALL: &[(&str, &str)] = &[
        ("classify", CLASSIFY),
        ("critically-evaluate", CRITIQUE),
        ("re-derive", REDERIVE),
        ("format-consistency", CONSISTENCY),
        ("concatenation-prohibition", NO_CONCAT),
    ];

    pub fn present(text: &str, directive: &str) -> bool {
        text.to_lowercase().contains(&directive.to_lowercase())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheBudget {
    pub max_total_chars: usize,
    pub per_trajectory_max_chars: usize,
    pub truncation_marker: String,
}

impl Default for CacheBudget {
    fn default() -> Self {
        Self {
            max_total_chars: 128_000,
            per_trajectory_max_chars: 8_000,
            truncation_marker: " …[truncated]".to_string(),
        }
    }
}

impl CacheBudget {
    fn validate(&self) -> Result<(), CacheError> {
        if self.per_trajectory_max_chars > self.max_total_chars {
            return Err(CacheError::InvalidBudget(
                "per_trajectory_max_chars exceeds max_total_chars".into(),
            ));
        }
        if self.max_total_chars == 0 {
            return Err(CacheError::InvalidBudget("max_total_chars must be positive".into()));
        }
        Ok(())
    }

    /// Per-entry content cap when the cache holds `n` entries.
    fn cap_for(&self, n: usize) -> Result<usize, CacheError> {
        let share = self.max_total_chars / n.max(1);
        if share == 0 {
            return Err(CacheError::BudgetInfeasible { entries: n, budget: self.max_total_chars });
        }
        Ok(self.per_trajectory_max_chars.min(share))
    }
}

/// Where a cache entry came from: a raw parallel trajectory or a prior
/// deliberation round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntryOrigin {
    Trajectory,
    Deliberation { round: u32 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheEntry {
    /// 1-based position in the shuffled order.
    pub slot_index: usize,
    pub source_trajectory_id: String,
    pub content: String,
    pub truncated: bool,
    pub origin: EntryOrigin,
}

impl CacheEntry {
    fn header(&self) -> String {
        match self.origin {
            EntryOrigin::Trajectory => format!("Trajectory {}:", self.slot_index),
            EntryOrigin::Deliberation { round } => {
                format!("Trajectory {} (round-{} deliberation):", self.slot_index, round)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemoryCache {
    pub query_id: String,
    pub entries: Vec<CacheEntry>,
    pub shuffle_seed: u64,
    pub serialized: String,
}

impl MemoryCache {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Characters of serialized text that are framing rather than entry
    /// content: section headers, separators, and truncation markers.
    pub fn framing_overhead(&self, budget: &CacheBudget) -> usize {
        let headers: usize = self.entries.iter().map(|e| e.header().chars().count() + 1).sum();
        let separators = self.entries.len().saturating_sub(1) * 2;
        let marker_chars = budget.truncation_marker.chars().count();
        let markers = self.entries.iter().filter(|e| e.truncated).count() * marker_chars;
        headers + separators + markers
    }
}

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("trajectory set is empty")]
    EmptySet,
    #[error("budget of {budget} chars cannot hold even one char per entry for {entries} entries")]
    BudgetInfeasible { entries: usize, budget: usize },
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
    #[error("unknown template: {0}")]
    UnknownTemplate(String),
    #[error("unresolved placeholder in template: {0}")]
    UnresolvedPlaceholder(String),
}

/// Pruning policy. By default thinking is removed entirely; setting
/// `thinking_head_chars` retains a head excerpt ahead of the answer content.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Pruning {
    #[serde(default)]
    pub thinking_head_chars: usize,
}

fn truncate_chars(text: &str, cap: usize) -> (String, bool) {
    let mut taken: String = text.chars().take(cap).collect();
    if taken.chars().count() < text.chars().count() {
        (std::mem::take(&mut taken), true)
    } else {
        (taken, false)
    }
}

fn make_entry(
    source_id: String,
    thinking: &str,
    answer_content: &str,
    origin: EntryOrigin,
    cap: usize,
    marker: &str,
    pruning: Pruning,
) -> CacheEntry {
    let pruned = if pruning.thinking_head_chars > 0 && !thinking.is_empty() {
        let head: String = thinking.chars().take(pruning.thinking_head_chars).collect();
        format!("{head}…\n{answer_content}")
    } else {
        answer_content.to_string()
    };
    let (mut content, truncated) = truncate_chars(&pruned, cap);
    if truncated {
        content.push_str(marker);
    }
    CacheEntry { slot_index: 0, source_trajectory_id: source_id, content, truncated, origin }
}

fn finalize(query_id: String, mut entries: Vec<CacheEntry>, seed: u64) -> MemoryCache {
    let mut rng = SplitMix64::new(seed);
    rng.shuffle(&mut entries);
    for (position, entry) in entries.iter_mut().enumerate() {
        entry.slot_index = position + 1;
    }
    let serialized = entries
        .iter()
        .map(|e| format!("{}\n{}", e.header(), e.content))
        .collect::<Vec<_>>()
        .join("\n\n");
    MemoryCache { query_id, entries, shuffle_seed: seed, serialized }
}

/// Build the serialized memory cache for a trajectory set: prune thinking,
/// budget each entry, shuffle under `shuffle_seed`, serialize.
pub fn build_cache(
    set: &TrajectorySet,
    budget: &CacheBudget,
    shuffle_seed: u64,
) -> Result<MemoryCache, CacheError> {
    build_cache_with(set, budget, shuffle_seed, Pruning::default())
}

pub fn build_cache_with(
    set: &TrajectorySet,
    budget: &CacheBudget,
    shuffle_seed: u64,
    pruning: Pruning,
) -> Result<MemoryCache, CacheError> {
    if set.is_empty() {
        return Err(CacheError::EmptySet);
    }
    budget.validate()?;
    let cap = budget.cap_for(set.len())?;
    let entries: Vec<CacheEntry> = set
        .trajectories
        .iter()
        .map(|t| {
            make_entry(
                t.trajectory_id.clone(),
                &t.thinking,
                &t.answer_content,
                EntryOrigin::Trajectory,
                cap,
                &budget.truncation_marker,
                pruning,
            )
        })
        .collect();
    Ok(finalize(set.query_id.clone(), entries, shuffle_seed))
}

/// An addition slated for an extended cache; `raw_text` is pruned and
/// budgeted exactly like a trajectory before it enters.
#[derive(Debug, Clone)]
pub struct CacheAddition {
    pub source_id: String,
    pub raw_text: String,
    pub round: u32,
}

/// Extend a cache with prior-round deliberation outputs: prune and budget
/// the additions, append them, reshuffle everything under `shuffle_seed`,
/// and re-serialize. Existing entry contents are preserved verbatim.
pub fn extend_cache(
    cache: &MemoryCache,
    additions: &[CacheAddition],
    budget: &CacheBudget,
    shuffle_seed: u64,
) -> Result<MemoryCache, CacheError> {
    budget.validate()?;
    let total = cache.len() + additions.len();
    if total == 0 {
        return Err(CacheError::EmptySet);
    }
    let cap = budget.cap_for(total)?;
    let mut entries = cache.entries.clone();
    for addition in additions {
        let (thinking, answer_content, _malformed) = split_thinking(&addition.raw_text);
        entries.push(make_entry(
            addition.source_id.clone(),
            &thinking,
            &answer_content,
            EntryOrigin::Deliberation { round: addition.round },
            cap,
            &budget.truncation_marker,
            Pruning::default(),
        ));
    }
    Ok(finalize(cache.query_id.clone(), entries, shuffle_seed))
}

/// Re-shuffle an existing cache under a new seed without touching contents.
pub fn reshuffle(cache: &MemoryCache, shuffle_seed: u64) -> MemoryCache {
    finalize(cache.query_id.clone(), cache.entries.clone(), shuffle_seed)
}

/// Prompt templates, addressed by id. The built-in `general-prompt` ships
/// with the crate; [`TemplateStore::from_dir`] overlays `{id}.txt` files
/// from an assets directory on top of the built-ins.
#[derive(Debug, Clone)]
pub struct TemplateStore {
    templates: BTreeMap<String, String>,
}

pub const DEFAULT_TEMPLATE_ID: &str = "general-prompt";

impl Default for TemplateStore {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateStore {
    pub fn builtin() -> Self {
        let mut templates = BTreeMap::new();
        templates.insert(
            DEFAULT_TEMPLATE_ID.to_string(),
            include_str!("../assets/prompts/general-prompt.txt").to_string(),
        );
        Self { templates }
    }

    pub fn from_dir(dir: impl AsRef<Path>) -> std::io::Result<Self> {
        let mut store = Self::builtin();
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) == Some("txt") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    store.templates.insert(stem.to_string(), std::fs::read_to_string(&path)?);
                }
            }
        }
        Ok(store)
    }

    pub fn get(&self, template_id: &str) -> Option<&str> {
        self.templates.get(template_id).map(String::as_str)
    }
}

/// Substitute `{name}` placeholders; any placeholder left over that is not
/// in the substitution map is an error, so prompts can never ship with
/// unresolved holes.
fn fill_placeholders(template: &str, values: &[(&str, &str)]) -> Result<String, CacheError> {
    let mut rendered = template.to_string();
    for (name, value) in values {
        rendered = rendered.replace(&format!("{{{name}}}"), value);
    }
    if let Some(leftover) = find_placeholder(&rendered) {
        if !values.iter().any(|(_, v)| v.contains(&leftover)) {
            return Err(CacheError::UnresolvedPlaceholder(leftover));
        }
    }
    Ok(rendered)
}

/// Find a `{lower_snake}` placeholder token, if any.
pub fn find_placeholder(text: &str) -> Option<String> {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let mut j = i + 1;
            while j < bytes.len() && (bytes[j].is_ascii_lowercase() || bytes[j] == b'_') {
                j += 1;
            }
            if j > i + 1 && j < bytes.len() && bytes[j] == b'}' {
                return Some(text[i + 1..j].to_string());
            }
        }
        i += 1;
    }
    None
}

/// Render the deliberation prompt: the original query verbatim, the numbered
/// cache entries, the four deliberation directives with the concatenation
/// prohibition, and the domain's output-format rule, in that order.
pub fn render_deliberation_prompt(
    cache: &MemoryCache,
    query: &Query,
    template_id: &str,
    store: &TemplateStore,
) -> Result<String, CacheError> {
    let template = store
        .get(template_id)
        .ok_or_else(|| CacheError::UnknownTemplate(template_id.to_string()))?;
    fill_placeholders(
        template,
        &[
            ("query", &query.text),
            ("entries", &cache.serialized),
            ("format_rule", query.domain_tag.format_rule()),
        ],
    )
}
