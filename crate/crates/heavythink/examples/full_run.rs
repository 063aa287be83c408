//! End-to-end benchmark run against scripted mocks: dataset -> parallel
//! generation -> memory cache -> deliberation -> metrics report -> RL cache
//! export, all inside a temporary directory.
//!
//! ```bash
//! cargo run --example full_run
//! ```

use heavythink::orchestrator::{
    export_rl_caches, run_benchmark, ProviderSpec, RunConfig, Seeds,
};
use heavythink::provider::{MockOutcome, MockRule, RetryPolicy};
use heavythink::{DeliberationConfig, SamplingParams};

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let dataset = dir.path().join("queries.jsonl");
    std::fs::write(
        &dataset,
        [
            r#"{"query_id":"sum","text":"what is 12+30","reference_answer":"42","domain_tag":"math"}"#,
            r#"{"query_id":"prime","text":"smallest prime above 90","reference_answer":"97","domain_tag":"math"}"#,
            r#"{"query_id":"tricky","text":"a tricky one","reference_answer":"7","domain_tag":"math"}"#,
        ]
        .join("\n"),
    )?;

    // The thinker is right 100% on `sum`, 50% on `prime`, never on `tricky`;
    // the deliberator rescues `prime` and fails `tricky`.
    let half_right: Vec<MockOutcome> = (0..8)
        .map(|i| MockOutcome::text(format!("\\boxed{{{}}}", if i % 2 == 0 { 97 } else { 91 })))
        .collect();
    let config = RunConfig {
        dataset,
        run_dir: dir.path().join("run"),
        k: 8,
        max_in_flight: 4,
        query_parallelism: 1,
        verify_tolerance: 0.0,
        seeds: Seeds::default(),
        thinker: ProviderSpec::Mock {
            seed: 1,
            rules: vec![
                MockRule::on("12+30").text("<think>easy</think>\\boxed{42}"),
                MockRule::on("prime").outcomes(half_right),
                MockRule::any().text("\\boxed{0}"),
            ],
            supports_n: None,
        },
        deliberator: Some(ProviderSpec::Mock {
            seed: 2,
            rules: vec![
                MockRule::on("12+30").text("\\boxed{42}"),
                MockRule::on("prime").text("the even answers are composite: \\boxed{97}"),
                MockRule::any().text("\\boxed{0}"),
            ],
            supports_n: None,
        }),
        deliberation: DeliberationConfig::default(),
        budget: Default::default(),
        sampling: SamplingParams::default(),
        selection: None,
        tool_loop: None,
        retry: RetryPolicy::default(),
        templates_dir: None,
    };

    let report = run_benchmark(&config).await?;
    print!("{}", report.metrics.render_table());
    for eval in &report.metrics.per_query {
        println!(
            "  {:<8} pass_rate={:.3} vote={:?}",
            eval.query_id, eval.parallel_pass_rate, eval.vote_answer
        );
    }

    let out = dir.path().join("rl-caches.jsonl");
    let count = export_rl_caches(&config.run_dir, (0.0, 0.625), &[4, 8], 5, &out)?;
    println!("\nexported {count} RL cache records to {}", out.display());
    Ok(())
}
