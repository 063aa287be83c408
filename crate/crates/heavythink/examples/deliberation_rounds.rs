//! Iterative deliberation: each round's cache extends the previous one with
//! the previous round's outputs, so entry counts grow K, K+K1, K+K1+K2, ….
//!
//! ```bash
//! cargo run --example deliberation_rounds
//! ```

use heavythink::cache::CacheBudget;
use heavythink::deliberation::{iterate, DeliberationConfig};
use heavythink::provider::{MockOutcome, MockRule, RetryPolicy, ScriptedMock};
use heavythink::trajectory::{generate_parallel, DomainTag, Query};
use heavythink::{SamplingParams, TemplateStore};

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let query = Query::new("demo-3", "Is 91 prime?", DomainTag::General).with_reference("no");
    let thinker = ScriptedMock::new(
        vec![MockRule::any()
            .outcomes(vec![
                MockOutcome::text("91 = 7 x 13, so no"),
                MockOutcome::text("it looks prime to me: yes"),
                MockOutcome::text("divisible by 7, so no"),
            ])
            .cycle()],
        0,
    );
    let set = generate_parallel(
        &query,
        8,
        &thinker,
        &SamplingParams::default(),
        4,
        &RetryPolicy::default(),
    )
    .await?;

    let deliberator = ScriptedMock::always("checking the candidates: 7 x 13 = 91, so no");
    let config = DeliberationConfig::uniform(3, 4);
    let result = iterate(
        &query,
        &set,
        &config,
        &deliberator,
        &CacheBudget::default(),
        11,
        &TemplateStore::builtin(),
        &RetryPolicy::default(),
    )
    .await?;

    for round in &result.rounds {
        println!(
            "round {}: cache entries = {:2}, outputs = {} ({:?} …)",
            round.round_index,
            round.input_cache.len(),
            round.outputs.len(),
            round.outputs[0].extracted_answer,
        );
    }
    if let Some(abort) = &result.aborted_at {
        println!("aborted at round {}: {}", abort.round_index, abort.error);
    }
    Ok(())
}
