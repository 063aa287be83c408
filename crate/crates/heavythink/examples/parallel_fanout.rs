//! Fan out K independent reasoning trajectories against the scripted mock
//! and inspect the thinking/answer decomposition.
//!
//! ```bash
//! cargo run --example parallel_fanout
//! ```

use heavythink::provider::{MockOutcome, MockRule, RetryPolicy, ScriptedMock};
use heavythink::trajectory::{generate_parallel, DomainTag, Query};
use heavythink::SamplingParams;

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A scripted thinker that cycles four different boxed answers, the way a
    // sampled model would disagree with itself.
    let outcomes: Vec<MockOutcome> = ["17", "17", "19", "17"]
        .iter()
        .map(|v| MockOutcome::text(format!("<think>trying things…</think>The answer is \\boxed{{{v}}}.")))
        .collect();
    let thinker = ScriptedMock::new(vec![MockRule::any().outcomes(outcomes).cycle()], 0);

    let query = Query::new("demo-1", "Compute 9 + 8.", DomainTag::Math).with_reference("17");
    let sampling = SamplingParams::default(); // temperature 1.0, top_p 0.95, top_k 10
    let set = generate_parallel(&query, 8, &thinker, &sampling, 4, &RetryPolicy::default()).await?;

    println!("query: {}", query.text);
    println!("fan-out K = {}, got {} trajectories\n", set.fan_out, set.len());
    for trajectory in &set.trajectories {
        println!(
            "  {}  answer={:?}  extraction_ok={}  thinking_chars={}",
            trajectory.trajectory_id,
            trajectory.extracted_answer,
            trajectory.extraction_ok,
            trajectory.thinking.chars().count(),
        );
    }
    Ok(())
}
