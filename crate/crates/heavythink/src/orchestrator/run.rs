//! The end-to-end pipeline: dataset ingestion, generation, caching,
//! deliberation, evaluation, and resumable persistence.
//!
//! Each query flows through the stages sequentially; queries run
//! concurrently up to `query_parallelism`. Stage outputs persist as one
//! JSONL file per query with digest markers in the run record, so a rerun
//! over a populated run_dir replays from disk and issues zero provider
//! calls. Reports carry no timestamps: identical (config, mock, seeds)
//! yields byte-identical report JSON.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use crate::cache::{MemoryCache, TemplateStore};
use crate::deliberation::{iterate, DeliberationOutput, IterationAbort};
use crate::metrics::{
    bucket_analysis, MetricsReport, PassRateBucket, QueryEvaluation, BUCKET_EDGES,
};
use crate::rng::keyed_seed;
use crate::selection::{select, SelectionSpec, SelectionStrategy};
use crate::tool_loop::run_tool_interleaved;
use crate::trajectory::{generate_parallel, Query, SlotFailure, Trajectory, TrajectorySet};

use super::config::{BuiltProvider, RunConfig, Seeds};
use super::store::{write_jsonl, QueryMarkers, RunRecord, StageMarker};
use super::OrchestratorError;

/// How far the pipeline runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineMode {
    /// Generation stage only.
    GenerateOnly,
    /// Deliberation over existing trajectories (strict prerequisite).
    DeliberateOnly,
    /// Metrics over existing stages (strict prerequisites).
    EvaluateOnly,
    /// Everything, generating whatever is missing.
    Full,
}

impl PipelineMode {
    fn wants_deliberation(self) -> bool {
        !matches!(self, PipelineMode::GenerateOnly)
    }

    fn wants_report(self) -> bool {
        matches!(self, PipelineMode::EvaluateOnly | PipelineMode::Full)
    }

    fn may_generate(self) -> bool {
        matches!(self, PipelineMode::GenerateOnly | PipelineMode::Full)
    }

    fn may_deliberate(self) -> bool {
        matches!(self, PipelineMode::DeliberateOnly | PipelineMode::Full)
    }
}

/// Selection provenance recorded in run metadata; the diversity measure is
/// named explicitly because it is an artifact stand-in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionProvenance {
    pub strategy: SelectionStrategy,
    pub k: usize,
    pub seed: u64,
    pub diversity_measure: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub k: u32,
    pub k1: u32,
    pub rounds: u32,
    pub seeds: Seeds,
    pub verify_tolerance: f64,
    #[serde(default)]
    pub selection: Option<SelectionProvenance>,
    /// The quartile reading behind the bucket labels.
    pub bucket_edges: String,
    #[serde(default)]
    pub query_errors: BTreeMap<String, String>,
    #[serde(default)]
    pub unverifiable_queries: u64,
}

/// The persisted report: metadata, aggregate metrics, and bucket analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FullReport {
    pub metadata: RunMetadata,
    pub metrics: MetricsReport,
    pub buckets: Vec<PassRateBucket>,
}

/// In-memory outcome of a pipeline run. Provider handles are returned so
/// callers can assert on mock instrumentation.
pub struct RunOutcome {
    pub report: Option<FullReport>,
    pub thinker: BuiltProvider,
    pub deliberator: BuiltProvider,
}

pub const REPORT_FILE: &str = "report.json";
pub const REPORT_CSV_FILE: &str = "report.csv";
pub const QUERIES_FILE: &str = "queries.jsonl";

fn trajectories_rel(query_id: &str) -> String {
    format!("trajectories/{query_id}.jsonl")
}

fn caches_rel(query_id: &str) -> String {
    format!("caches/{query_id}.jsonl")
}

fn deliberation_rel(query_id: &str) -> String {
    format!("deliberation/{query_id}.jsonl")
}

/// Parse a JSONL dataset of queries, rejecting duplicate ids.
pub fn load_dataset(path: &Path) -> Result<Vec<Query>, OrchestratorError> {
    let body = std::fs::read_to_string(path).map_err(|e| OrchestratorError::DatasetParse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    let mut queries = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (index, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let query: Query =
            serde_json::from_str(line).map_err(|e| OrchestratorError::DatasetParse {
                path: path.display().to_string(),
                line: index + 1,
                message: e.to_string(),
            })?;
        if query.text.is_empty() {
            return Err(OrchestratorError::DatasetParse {
                path: path.display().to_string(),
                line: index + 1,
                message: "query text is empty".into(),
            });
        }
        if !seen.insert(query.query_id.clone()) {
            return Err(OrchestratorError::DatasetParse {
                path: path.display().to_string(),
                line: index + 1,
                message: format!("duplicate query_id {}", query.query_id),
            });
        }
        queries.push(query);
    }
    if queries.is_empty() {
        return Err(OrchestratorError::EmptyDataset(path.display().to_string()));
    }
    Ok(queries)
}

struct QueryResult {
    query_id: String,
    markers: QueryMarkers,
    eval: Option<QueryEvaluation>,
    error: Option<String>,
    unverifiable: bool,
}

struct QueryContext<'a> {
    config: &'a RunConfig,
    thinker: &'a BuiltProvider,
    deliberator: &'a BuiltProvider,
    templates: &'a TemplateStore,
    mode: PipelineMode,
}

async fn generate_stage(
    query: &Query,
    ctx: &QueryContext<'_>,
    markers: &mut QueryMarkers,
) -> Result<TrajectorySet, OrchestratorError> {
    let config = ctx.config;
    let rel = trajectories_rel(&query.query_id);
    let path = config.run_dir.join(&rel);

    if let Some(marker) = &markers.generate {
        if marker.verifies(&config.run_dir) {
            let trajectories: Vec<Trajectory> = super::store::read_jsonl(&path)?;
            return Ok(TrajectorySet {
                query_id: query.query_id.clone(),
                trajectories,
                fan_out: config.k,
                failures: marker.failures.clone(),
            });
        }
        markers.generate = None;
        markers.deliberate = None;
    }
    if !ctx.mode.may_generate() {
        return Err(OrchestratorError::StageMissing {
            stage: "generate",
            query_id: query.query_id.clone(),
        });
    }

    let set = if let Some(tool_settings) = &config.tool_loop {
        let tool_config = tool_settings.build()?;
        let provider = ctx.thinker.as_provider();
        let loops = (0..config.k as usize).map(|slot| {
            let tool_config = tool_config.clone();
            async move {
                run_tool_interleaved(query, slot, provider, &tool_config, &config.sampling, &config.retry)
                    .await
            }
        });
        let results: Vec<_> =
            stream::iter(loops).buffered(config.max_in_flight.max(1)).collect().await;
        let mut trajectories = Vec::new();
        let mut failures = Vec::new();
        for (slot, result) in results.into_iter().enumerate() {
            match result {
                Ok(trajectory) => trajectories.push(trajectory),
                Err(err) => failures.push(SlotFailure { slot, error: err.to_string() }),
            }
        }
        if trajectories.is_empty() {
            return Err(OrchestratorError::Trajectory(
                crate::trajectory::TrajectoryError::AllGenerationsFailed {
                    attempted: config.k as usize,
                    last_error: failures.last().map(|f| f.error.clone()).unwrap_or_default(),
                },
            ));
        }
        TrajectorySet {
            query_id: query.query_id.clone(),
            trajectories,
            fan_out: config.k,
            failures,
        }
    } else {
        generate_parallel(
            query,
            config.k,
            ctx.thinker.as_provider(),
            &config.sampling,
            config.max_in_flight,
            &config.retry,
        )
        .await?
    };

    let digest = write_jsonl(&path, &set.trajectories)?;
    markers.generate = Some(StageMarker {
        files: BTreeMap::from([(rel, digest)]),
        failures: set.failures.clone(),
        aborted: None,
    });
    markers.deliberate = None;
    Ok(set)
}

async fn deliberate_stage(
    query: &Query,
    set: &TrajectorySet,
    ctx: &QueryContext<'_>,
    markers: &mut QueryMarkers,
) -> Result<(Vec<DeliberationOutput>, Option<IterationAbort>), OrchestratorError> {
    let config = ctx.config;
    let outputs_rel = deliberation_rel(&query.query_id);
    let caches_rel = caches_rel(&query.query_id);
    let outputs_path = config.run_dir.join(&outputs_rel);

    if let Some(marker) = &markers.deliberate {
        if marker.verifies(&config.run_dir) {
            let outputs: Vec<DeliberationOutput> = super::store::read_jsonl(&outputs_path)?;
            return Ok((outputs, marker.aborted.clone()));
        }
        markers.deliberate = None;
    }
    if !ctx.mode.may_deliberate() {
        return Err(OrchestratorError::StageMissing {
            stage: "deliberate",
            query_id: query.query_id.clone(),
        });
    }

    let base_seed = keyed_seed(config.seeds.shuffle, &query.query_id);
    let result = iterate(
        query,
        set,
        &config.deliberation,
        ctx.deliberator.as_provider(),
        &config.budget,
        base_seed,
        ctx.templates,
        &config.retry,
    )
    .await?;

    let caches: Vec<MemoryCache> = result.rounds.iter().map(|r| r.input_cache.clone()).collect();
    let outputs: Vec<DeliberationOutput> =
        result.rounds.iter().flat_map(|r| r.outputs.clone()).collect();
    let caches_digest = write_jsonl(&config.run_dir.join(&caches_rel), &caches)?;
    let outputs_digest = write_jsonl(&outputs_path, &outputs)?;
    markers.deliberate = Some(StageMarker {
        files: BTreeMap::from([(caches_rel, caches_digest), (outputs_rel, outputs_digest)]),
        failures: Vec::new(),
        aborted: result.aborted_at.clone(),
    });
    Ok((outputs, result.aborted_at))
}

async fn process_query(
    query: &Query,
    ctx: &QueryContext<'_>,
    mut markers: QueryMarkers,
) -> QueryResult {
    let config = ctx.config;
    let mut result = QueryResult {
        query_id: query.query_id.clone(),
        markers: markers.clone(),
        eval: None,
        error: None,
        unverifiable: query.reference_answer.is_none(),
    };

    let set = match generate_stage(query, ctx, &mut markers).await {
        Ok(set) => set,
        Err(err) => {
            result.markers = markers;
            result.error = Some(format!("generate: {err}"));
            return result;
        }
    };

    let selected = if let Some(settings) = &config.selection {
        let spec = SelectionSpec {
            strategy: settings.strategy,
            k: settings.k,
            seed: keyed_seed(config.seeds.selection, &query.query_id),
        };
        match select(&set, &spec) {
            Ok(subset) => subset,
            Err(err) => {
                result.markers = markers;
                result.error = Some(format!("select: {err}"));
                return result;
            }
        }
    } else {
        set
    };

    if !ctx.mode.wants_deliberation() {
        result.markers = markers;
        return result;
    }

    let (outputs, aborted) = match deliberate_stage(query, &selected, ctx, &mut markers).await {
        Ok(pair) => pair,
        Err(err) => {
            result.markers = markers;
            result.error = Some(format!("deliberate: {err}"));
            return result;
        }
    };
    result.markers = markers;

    if outputs.is_empty() {
        let detail = aborted
            .map(|a| format!("round {}: {}", a.round_index, a.error))
            .unwrap_or_else(|| "no deliberation outputs".to_string());
        result.error = Some(format!("deliberate: {detail}"));
        return result;
    }

    if ctx.mode.wants_report() {
        let final_round =
            outputs.iter().map(|o| o.round_index).max().expect("outputs non-empty");
        let final_outputs: Vec<DeliberationOutput> =
            outputs.into_iter().filter(|o| o.round_index == final_round).collect();
        result.eval = Some(QueryEvaluation::evaluate(
            query,
            &selected,
            &final_outputs,
            config.seeds.tie,
            config.verify_tolerance,
        ));
    }
    result
}

/// Drive the pipeline to the requested stage over every dataset query.
pub async fn run_pipeline(
    config: &RunConfig,
    mode: PipelineMode,
) -> Result<RunOutcome, OrchestratorError> {
    config.validate()?;
    let queries = load_dataset(&config.dataset)?;
    std::fs::create_dir_all(&config.run_dir)?;
    write_jsonl(&config.run_dir.join(QUERIES_FILE), &queries)?;

    let thinker = config.thinker.build()?;
    let deliberator = match &config.deliberator {
        Some(spec) => spec.build()?,
        None => thinker.clone(),
    };
    let templates = match &config.templates_dir {
        Some(dir) => TemplateStore::from_dir(dir)?,
        None => TemplateStore::builtin(),
    };

    let mut record = RunRecord::load_or_init(&config.run_dir, config);
    let ctx = QueryContext {
        config,
        thinker: &thinker,
        deliberator: &deliberator,
        templates: &templates,
        mode,
    };

    let results: Vec<QueryResult> = stream::iter(
        queries.iter().map(|query| process_query(query, &ctx, record.markers(&query.query_id))),
    )
    .buffered(config.query_parallelism.max(1))
    .collect()
    .await;

    let mut query_errors = BTreeMap::new();
    let mut evals = Vec::new();
    let mut unverifiable = 0u64;
    for result in results {
        record.queries.insert(result.query_id.clone(), result.markers.clone());
        if let Some(error) = result.error {
            query_errors.insert(result.query_id.clone(), error);
            continue;
        }
        if result.unverifiable {
            unverifiable += 1;
        }
        if let Some(eval) = result.eval {
            evals.push(eval);
        }
    }
    record.save(&config.run_dir)?;

    let report = if mode.wants_report() {
        if evals.is_empty() {
            let detail = query_errors
                .iter()
                .next()
                .map(|(id, err)| format!("{id}: {err}"))
                .unwrap_or_else(|| "empty evaluation set".to_string());
            return Err(OrchestratorError::NoEvaluations(detail));
        }
        let metrics = MetricsReport::compute(
            evals,
            config.effective_k(),
            config.effective_k1(),
            config.seeds.tie,
            config.verify_tolerance,
        )?;
        let buckets = bucket_analysis(&metrics.per_query, config.effective_k1())?;
        let metadata = RunMetadata {
            k: config.effective_k(),
            k1: config.effective_k1(),
            rounds: config.deliberation.rounds,
            seeds: config.seeds,
            verify_tolerance: config.verify_tolerance,
            selection: config.selection.as_ref().map(|s| SelectionProvenance {
                strategy: s.strategy,
                k: s.k,
                seed: config.seeds.selection,
                diversity_measure: "char-4-shingle jaccard, greedy max-min".to_string(),
            }),
            bucket_edges: BUCKET_EDGES.to_string(),
            query_errors,
            unverifiable_queries: unverifiable,
        };
        let report = FullReport { metadata, metrics, buckets };
        let json = serde_json::to_string_pretty(&report)?;
        std::fs::write(config.run_dir.join(REPORT_FILE), &json)?;
        let csv = report.metrics.to_csv(config.seeds.tie, config.verify_tolerance)?;
        std::fs::write(config.run_dir.join(REPORT_CSV_FILE), csv)?;
        Some(report)
    } else {
        None
    };

    Ok(RunOutcome { report, thinker, deliberator })
}

/// Run the whole benchmark pipeline and return the persisted report.
pub async fn run_benchmark(config: &RunConfig) -> Result<FullReport, OrchestratorError> {
    let outcome = run_pipeline(config, PipelineMode::Full).await?;
    Ok(outcome.report.expect("full mode produces a report"))
}

/// Load a previously persisted report from a run directory.
pub fn load_report(run_dir: &Path) -> Result<FullReport, OrchestratorError> {
    let path = run_dir.join(REPORT_FILE);
    let body = std::fs::read_to_string(&path)
        .map_err(|e| OrchestratorError::Store(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&body)?)
}

/// Load the persisted queries copy from a run directory.
pub fn load_queries(run_dir: &Path) -> Result<Vec<Query>, OrchestratorError> {
    super::store::read_jsonl(&run_dir.join(QUERIES_FILE))
}

/// Load one query's trajectories from a run directory.
pub fn load_trajectories(
    run_dir: &Path,
    query_id: &str,
) -> Result<Vec<Trajectory>, OrchestratorError> {
    super::store::read_jsonl(&run_dir.join(trajectories_rel(query_id)))
}

pub fn trajectories_path(run_dir: &Path, query_id: &str) -> PathBuf {
    run_dir.join(trajectories_rel(query_id))
}
