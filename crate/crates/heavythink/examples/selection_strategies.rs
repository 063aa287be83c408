//! Compare the four trajectory selection strategies on one pool.
//!
//! ```bash
//! cargo run --example selection_strategies
//! ```

use heavythink::provider::{MockOutcome, MockRule, RetryPolicy, ScriptedMock};
use heavythink::selection::{select, SelectionSpec, SelectionStrategy};
use heavythink::trajectory::{generate_parallel, DomainTag, Query};
use heavythink::SamplingParams;

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scripted: Vec<MockOutcome> = [
        ("\\boxed{12}", "a short take"),
        ("\\boxed{12}", "another concise derivation"),
        ("\\boxed{12}", "twelve, clearly"),
        ("\\boxed{15}", "a very long and winding derivation that goes on and on before concluding"),
        ("\\boxed{15}", "a different long exploration with plenty of dead ends along the way"),
        ("\\boxed{10}", "an outlier answer from a creative route"),
        ("\\boxed{12}", "yet another agreement with twelve"),
        ("\\boxed{9}", "completely unlike all other texts: geese, llamas, xylophones"),
    ]
    .iter()
    .map(|(boxed, flavor)| MockOutcome::text(format!("{flavor}. {boxed}")))
    .collect();
    let thinker = ScriptedMock::new(vec![MockRule::any().outcomes(scripted)], 0);

    let query = Query::new("demo-4", "Count the dozen.", DomainTag::Math).with_reference("12");
    let pool = generate_parallel(
        &query,
        8,
        &thinker,
        &SamplingParams::default(),
        4,
        &RetryPolicy::default(),
    )
    .await?;

    for strategy in [
        SelectionStrategy::Random,
        SelectionStrategy::MaxDiversity,
        SelectionStrategy::MaxLength,
        SelectionStrategy::MaxAnswerNum,
    ] {
        let spec = SelectionSpec { strategy, k: 4, seed: 42 };
        let picked = select(&pool, &spec)?;
        let ids: Vec<&str> = picked.trajectories.iter().map(|t| t.trajectory_id.as_str()).collect();
        let answers: Vec<&str> = picked
            .trajectories
            .iter()
            .map(|t| t.extracted_answer.as_deref().unwrap_or("-"))
            .collect();
        println!("{strategy:?}: ids {ids:?} answers {answers:?}");
    }
    Ok(())
}
