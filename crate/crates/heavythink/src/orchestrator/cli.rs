//! Command-line interface over the pipeline. Exit codes: 0 success,
//! 1 validation failure, 2 usage or runtime error.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::metrics::unbiased_pass_at_k;
use crate::selection::{select, SelectionSpec, SelectionStrategy};
use crate::skill::{emit_skill, validate_skill};
use crate::trajectory::{Trajectory, TrajectorySet};

use super::config::RunConfig;
use super::export::export_rl_caches;
use super::run::{run_pipeline, PipelineMode};
use super::OrchestratorError;

#[derive(Parser)]
#[command(
    name = "heavythink",
    version,
    about = "Two-phase test-time scaling harness: parallel reasoning fan-out, \
             serialized memory caches, sequential deliberation, and evaluation metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: generate, deliberate, evaluate, report.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate and persist parallel trajectories only.
    Generate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Deliberate over previously generated trajectories.
    Deliberate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compute metrics over completed stages and write the report.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Also print the unbiased combinatorial pass@k estimate.
        #[arg(long)]
        unbiased_pass_k: Option<usize>,
    },
    /// Select k trajectories from a stored pool and print their ids.
    Select {
        /// Path to a trajectories JSONL file.
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long)]
        strategy: String,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Emit the readable skill document.
    EmitSkill {
        #[arg(long, default_value_t = 8)]
        k: u32,
        #[arg(long, default_value_t = 4)]
        k1: u32,
        /// Write to a file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a skill document; exit 1 with findings when nonconformant.
    ValidateSkill {
        file: PathBuf,
    },
    /// Export serialized caches for RL training from a completed run.
    ExportRl {
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        low: f64,
        #[arg(long, default_value_t = 0.625)]
        high: f64,
        /// Comma-separated subset sizes to draw from.
        #[arg(long, value_delimiter = ',', default_values_t = vec![8, 16])]
        k_choices: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parse argv and execute. Returns the process exit code.
pub async fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            // clap exits 0 for --help/--version and 2 for usage errors.
            let _ = err.print();
            return if err.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli).await {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

async fn dispatch(cli: Cli) -> Result<i32, OrchestratorError> {
    match cli.command {
        Command::Run { config } => {
            let config = RunConfig::load(&config)?;
            let outcome = run_pipeline(&config, PipelineMode::Full).await?;
            let report = outcome.report.expect("full mode produces a report");
            print!("{}", report.metrics.render_table());
            println!("report: {}", config.run_dir.join(super::run::REPORT_FILE).display());
            Ok(0)
        }
        Command::Generate { config } => {
            let config = RunConfig::load(&config)?;
            run_pipeline(&config, PipelineMode::GenerateOnly).await?;
            println!("trajectories written under {}", config.run_dir.display());
            Ok(0)
        }
        Command::Deliberate { config } => {
            let config = RunConfig::load(&config)?;
            run_pipeline(&config, PipelineMode::DeliberateOnly).await?;
            println!("deliberation written under {}", config.run_dir.display());
            Ok(0)
        }
        Command::Evaluate { config, unbiased_pass_k } => {
            let config = RunConfig::load(&config)?;
            let outcome = run_pipeline(&config, PipelineMode::EvaluateOnly).await?;
            let report = outcome.report.expect("evaluate mode produces a report");
            print!("{}", report.metrics.render_table());
            if let Some(k) = unbiased_pass_k {
                let estimate = unbiased_pass_at_k(&report.metrics.per_query, k)?;
                println!("unbiased P@{k}: {estimate:.4}");
            }
            Ok(0)
        }
        Command::Select { trajectories, strategy, k, seed } => {
            let strategy: SelectionStrategy =
                strategy.parse().map_err(OrchestratorError::Config)?;
            let pool: Vec<Trajectory> = super::store::read_jsonl(&trajectories)?;
            let query_id =
                pool.first().map(|t| t.query_id.clone()).unwrap_or_default();
            let set = TrajectorySet {
                query_id,
                fan_out: pool.len() as u32,
                trajectories: pool,
                failures: Vec::new(),
            };
            let selected = select(&set, &SelectionSpec { strategy, k, seed })?;
            for trajectory in &selected.trajectories {
                println!("{}", trajectory.trajectory_id);
            }
            Ok(0)
        }
        Command::EmitSkill { k, k1, out } => {
            let skill = emit_skill(k, k1, &[]);
            match out {
                Some(path) => std::fs::write(&path, &skill)?,
                None => print!("{skill}"),
            }
            Ok(0)
        }
        Command::ValidateSkill { file } => {
            let text = std::fs::read_to_string(&file)?;
            let findings = validate_skill(&text);
            if findings.is_empty() {
                println!("conformant");
                Ok(0)
            } else {
                for finding in &findings {
                    println!("{finding}");
                }
                Ok(1)
            }
        }
        Command::ExportRl { run_dir, low, high, k_choices, seed, out } => {
            let count = export_rl_caches(&run_dir, (low, high), &k_choices, seed, &out)?;
            println!("exported {count} records to {}", out.display());
            Ok(0)
        }
    }
}
