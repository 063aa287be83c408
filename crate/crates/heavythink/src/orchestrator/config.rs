//! Run configuration: a TOML file describing dataset, providers, fan-outs,
//! budget, seeds, and optional selection/tool-loop settings. API keys never
//! appear here — HTTP endpoints name the environment variable to read.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::cache::CacheBudget;
use crate::deliberation::DeliberationConfig;
use crate::provider::{
    HttpProvider, MockRule, Provider, ProviderEndpoint, RetryPolicy, SamplingParams, ScriptedMock,
};
use crate::selection::SelectionStrategy;
use crate::tool_loop::{
    builtin_arithmetic_executor, external_command_executor, ToolLoopConfig,
};

use super::OrchestratorError;

/// Seeds split per stochastic role, all recorded in the report.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Seeds {
    pub shuffle: u64,
    pub tie: u64,
    pub selection: u64,
    pub rl: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { shuffle: 1, tie: 2, selection: 3, rl: 4 }
    }
}

/// A provider binding: a real OpenAI-compatible HTTP endpoint or a
/// deterministic scripted mock.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderSpec {
    Http(ProviderEndpoint),
    Mock {
        #[serde(default)]
        seed: u64,
        rules: Vec<MockRule>,
        #[serde(default)]
        supports_n: Option<bool>,
    },
}

/// A built provider handle that keeps mock instrumentation reachable.
#[derive(Clone)]
pub enum BuiltProvider {
    Http(Arc<HttpProvider>),
    Mock(Arc<ScriptedMock>),
}

impl BuiltProvider {
    pub fn as_provider(&self) -> &dyn Provider {
        match self {
            BuiltProvider::Http(p) => p.as_ref(),
            BuiltProvider::Mock(p) => p.as_ref(),
        }
    }

    /// Wire calls made so far; only mocks are instrumented.
    pub fn call_count(&self) -> Option<usize> {
        match self {
            BuiltProvider::Http(_) => None,
            BuiltProvider::Mock(p) => Some(p.call_count()),
        }
    }
}

impl ProviderSpec {
    pub fn build(&self) -> Result<BuiltProvider, OrchestratorError> {
        match self {
            ProviderSpec::Http(endpoint) => Ok(BuiltProvider::Http(Arc::new(
                HttpProvider::new(endpoint.clone()).map_err(OrchestratorError::Provider)?,
            ))),
            ProviderSpec::Mock { seed, rules, supports_n } => {
                if rules.is_empty() {
                    return Err(OrchestratorError::Config(
                        "mock provider needs at least one rule".into(),
                    ));
                }
                let mut mock = ScriptedMock::new(rules.clone(), *seed);
                if *supports_n == Some(false) {
                    mock = mock.without_n_support();
                }
                Ok(BuiltProvider::Mock(Arc::new(mock)))
            }
        }
    }
}

/// Selection applied between generation and caching; the seed comes from
/// `seeds.selection`, keyed per query.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionSettings {
    pub strategy: SelectionStrategy,
    pub k: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExecutorSpec {
    Arithmetic,
    Command { command_template: String, workdir: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolLoopSettings {
    #[serde(default = "default_max_rounds")]
    pub max_rounds: u32,
    /// Per-call timeout in seconds.
    #[serde(default = "default_tool_timeout_secs", alias = "timeout")]
    pub timeout_secs: f64,
    pub executor: ExecutorSpec,
}

fn default_max_rounds() -> u32 {
    50
}

fn default_tool_timeout_secs() -> f64 {
    30.0
}

impl ToolLoopSettings {
    pub fn build(&self) -> Result<ToolLoopConfig, OrchestratorError> {
        let timeout = Duration::from_secs_f64(self.timeout_secs);
        let executor = match &self.executor {
            ExecutorSpec::Arithmetic => builtin_arithmetic_executor(),
            ExecutorSpec::Command { command_template, workdir } => {
                external_command_executor(command_template.clone(), workdir, timeout)
                    .map_err(|e| OrchestratorError::Config(e.to_string()))?
            }
        };
        Ok(ToolLoopConfig { max_rounds: self.max_rounds, per_call_timeout: timeout, executor })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub run_dir: PathBuf,
    /// Parallel fan-out K.
    #[serde(default = "default_k")]
    pub k: u32,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    /// Queries processed concurrently.
    #[serde(default = "default_query_parallelism")]
    pub query_parallelism: usize,
    #[serde(default)]
    pub verify_tolerance: f64,
    #[serde(default)]
    pub seeds: Seeds,
    pub thinker: ProviderSpec,
    /// Distinct deliberator binding; defaults to the thinker.
    #[serde(default)]
    pub deliberator: Option<ProviderSpec>,
    #[serde(default)]
    pub deliberation: DeliberationConfig,
    #[serde(default)]
    pub budget: CacheBudget,
    #[serde(default)]
    pub sampling: SamplingParams,
    #[serde(default)]
    pub selection: Option<SelectionSettings>,
    #[serde(default)]
    pub tool_loop: Option<ToolLoopSettings>,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Extra prompt templates overlaying the built-ins.
    #[serde(default)]
    pub templates_dir: Option<PathBuf>,
}

fn default_k() -> u32 {
    8
}

fn default_max_in_flight() -> usize {
    4
}

fn default_query_parallelism() -> usize {
    1
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, OrchestratorError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            OrchestratorError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| OrchestratorError::Config(format!("{}: {e}", path.display())))?;
        // Relative paths resolve against the config file's directory.
        if let Some(base) = path.parent() {
            if config.dataset.is_relative() {
                config.dataset = base.join(&config.dataset);
            }
            if config.run_dir.is_relative() {
                config.run_dir = base.join(&config.run_dir);
            }
            if let Some(dir) = &config.templates_dir {
                if dir.is_relative() {
                    config.templates_dir = Some(base.join(dir));
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if self.k == 0 {
            return Err(OrchestratorError::Config("k must be at least 1".into()));
        }
        self.deliberation
            .validate()
            .map_err(|e| OrchestratorError::Config(e.to_string()))?;
        if let Some(selection) = &self.selection {
            if selection.k == 0 {
                return Err(OrchestratorError::Config("selection.k must be at least 1".into()));
            }
            if selection.k > self.k as usize {
                return Err(OrchestratorError::Config(format!(
                    "selection.k={} exceeds the pool of k={}",
                    selection.k, self.k
                )));
            }
        }
        Ok(())
    }

    /// K used for metrics: the post-selection count when selection is on.
    pub fn effective_k(&self) -> u32 {
        self.selection.as_ref().map(|s| s.k as u32).unwrap_or(self.k)
    }

    /// K^(1) reported for heavy metrics: the final round's fan-out.
    pub fn effective_k1(&self) -> u32 {
        self.deliberation.round_fanouts.last().copied().unwrap_or(1)
    }

    /// Canonical digest of the config, used to detect config drift between
    /// runs sharing a run_dir.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        super::store::sha256_hex(canonical.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MOCK_CONFIG: &str = r#"
dataset = "queries.jsonl"
run_dir = "run"
k = 8

[thinker]
kind = "mock"
seed = 7

[[thinker.rules]]
matcher = "any"
outcomes = [{ text = "\\boxed{4}" }]
repeat = "hold_last"
"#;

    #[test]
    fn parse_minimal_mock_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, MOCK_CONFIG).unwrap();
        let config = RunConfig::load(&path).unwrap();
        assert_eq!(config.k, 8);
        assert_eq!(config.effective_k1(), 4);
        assert_eq!(config.deliberation.rounds, 1);
        assert_eq!(config.sampling.temperature, 1.0);
        assert!(config.dataset.starts_with(dir.path()));
        let provider = config.thinker.build().unwrap();
        assert_eq!(provider.call_count(), Some(0));
    }

    #[test]
    fn http_provider_spec_round_trips() {
        let spec = ProviderSpec::Http(ProviderEndpoint::new("http://localhost/v1", "m"));
        let toml_text = toml::to_string(&spec).unwrap();
        let parsed: ProviderSpec = toml::from_str(&toml_text).unwrap();
        assert!(matches!(parsed, ProviderSpec::Http(_)));
    }

    #[test]
    fn selection_cannot_exceed_pool() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        let text = format!(
            "{MOCK_CONFIG}\n[selection]\nstrategy = \"max_answer_num\"\nk = 16\n"
        );
        std::fs::write(&path, text).unwrap();
        assert!(RunConfig::load(&path).is_err());
    }

    #[test]
    fn config_digest_tracks_changes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, MOCK_CONFIG).unwrap();
        let config = RunConfig::load(&path).unwrap();
        let mut changed = config.clone();
        changed.k = 16;
        assert_ne!(config.digest(), changed.digest());
        assert_eq!(config.digest(), config.clone().digest());
    }
}
