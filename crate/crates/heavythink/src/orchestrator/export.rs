//! RL-cache export: package trajectory subsets from a completed run as
//! serialized memory caches with rendered deliberation prompts, one JSONL
//! record per query, for consumption by an external RL trainer.
//!
//! Queries are filtered to a closed parallel pass-rate interval (default
//! `[0, 0.625]`); for each eligible query a subset size k is drawn from
//! `k_choices` (default `{8, 16}`) and that many trajectories are sampled
//! without replacement, all under a per-query seeded stream so reruns with
//! the same seed reproduce records byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cache::{build_cache, render_deliberation_prompt, CacheBudget, TemplateStore};
use crate::rng::{keyed_seed, SplitMix64};
use crate::trajectory::{Query, Trajectory, TrajectorySet};

use super::run::{load_queries, load_report, load_trajectories};
use super::store::RunRecord;
use super::OrchestratorError;

/// Default pass-rate interval for export eligibility.
pub const DEFAULT_RL_RANGE: (f64, f64) = (0.0, 0.625);

/// Default subset sizes drawn per record.
pub const DEFAULT_RL_K_CHOICES: [usize; 2] = [8, 16];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RlExportRecord {
    pub query_id: String,
    pub parallel_pass_rate: f64,
    /// Number of trajectories packaged into this record's cache.
    pub k: usize,
    pub source_trajectory_ids: Vec<String>,
    /// The full deliberation prompt over the serialized cache.
    pub prompt: String,
    #[serde(default)]
    pub reference_answer: Option<String>,
}

/// Export eligible queries from `run_dir` as RL cache records, returning
/// the number of records written to `out_path`.
pub fn export_rl_caches(
    run_dir: &Path,
    pass_rate_range: (f64, f64),
    k_choices: &[usize],
    seed: u64,
    out_path: &Path,
) -> Result<usize, OrchestratorError> {
    let (low, high) = pass_rate_range;
    if k_choices.is_empty() {
        return Err(OrchestratorError::Config("k_choices must be non-empty".into()));
    }
    let report = load_report(run_dir)?;
    let queries: BTreeMap<String, Query> = load_queries(run_dir)?
        .into_iter()
        .map(|q| (q.query_id.clone(), q))
        .collect();

    // Budget and template come from the run's config snapshot when present.
    let record = RunRecord::load(run_dir);
    let (budget, template_id, templates) = match record.and_then(|r| r.config) {
        Some(config) => {
            let templates = match &config.templates_dir {
                Some(dir) => TemplateStore::from_dir(dir)?,
                None => TemplateStore::builtin(),
            };
            (config.budget.clone(), config.deliberation.template_id.clone(), templates)
        }
        None => (
            CacheBudget::default(),
            crate::cache::DEFAULT_TEMPLATE_ID.to_string(),
            TemplateStore::builtin(),
        ),
    };

    let mut records = Vec::new();
    for eval in &report.metrics.per_query {
        // Closed interval on both ends.
        if eval.parallel_pass_rate < low || eval.parallel_pass_rate > high {
            continue;
        }
        let Some(query) = queries.get(&eval.query_id) else {
            continue;
        };
        let pool: Vec<Trajectory> = load_trajectories(run_dir, &eval.query_id)?;
        let feasible: Vec<usize> =
            k_choices.iter().copied().filter(|&k| k >= 1 && k <= pool.len()).collect();
        if feasible.is_empty() {
            continue;
        }
        let mut rng = SplitMix64::new(keyed_seed(seed, &eval.query_id));
        let k = feasible[rng.next_below(feasible.len() as u64) as usize];
        let indices = rng.sample_indices(pool.len(), k);
        let subset = TrajectorySet {
            query_id: eval.query_id.clone(),
            trajectories: indices.iter().map(|&i| pool[i].clone()).collect(),
            fan_out: k as u32,
            failures: Vec::new(),
        };
        let cache = build_cache(&subset, &budget, rng.next_u64())?;
        let prompt = render_deliberation_prompt(&cache, query, &template_id, &templates)?;
        records.push(RlExportRecord {
            query_id: eval.query_id.clone(),
            parallel_pass_rate: eval.parallel_pass_rate,
            k,
            source_trajectory_ids: subset
                .trajectories
                .iter()
                .map(|t| t.trajectory_id.clone())
                .collect(),
            prompt,
            reference_answer: query.reference_answer.clone(),
        });
    }

    if records.is_empty() {
        return Err(OrchestratorError::NoEligibleQueries);
    }
    super::store::write_jsonl(out_path, &records)?;
    Ok(records.len())
}
