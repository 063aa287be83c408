//! Tool-interleaved generation: the model emits tool calls, the executor
//! answers, and the feedback flows back into the conversation until the
//! model stops or the round cap hits.
//!
//! ```bash
//! cargo run --example tool_loop
//! ```

use heavythink::provider::{MockOutcome, MockRule, RetryPolicy, ScriptedMock};
use heavythink::tool_loop::{builtin_arithmetic_executor, run_tool_interleaved, ToolLoopConfig};
use heavythink::trajectory::{DomainTag, Query};
use heavythink::SamplingParams;

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Scripted thinker: two tool calls (the second one erroneous), then a
    // final boxed answer.
    let thinker = ScriptedMock::new(
        vec![MockRule::any().outcomes(vec![
            MockOutcome::tool_call(
                r#"Let me compute. <tool_call>{"name":"calculator","arguments":"2**20"}</tool_call>"#,
            ),
            MockOutcome::tool_call(
                r#"And divide. <tool_call>{"name":"calculator","arguments":"1/0"}</tool_call>"#,
            ),
            MockOutcome::text("<think>1/0 failed, but 2**20 worked</think>\\boxed{1048576}"),
        ])],
        0,
    );

    let query = Query::new("demo-6", "What is 2 to the 20th power?", DomainTag::Math)
        .with_reference("1048576");
    let config = ToolLoopConfig::new(builtin_arithmetic_executor());
    let trajectory = run_tool_interleaved(
        &query,
        0,
        &thinker,
        &config,
        &SamplingParams::default(),
        &RetryPolicy::default(),
    )
    .await?;

    println!("tool transcript ({} rounds):", trajectory.tool_transcript.len());
    for exchange in &trajectory.tool_transcript {
        println!(
            "  round {}: {}({:?}) -> ok={} {:?}",
            exchange.call.round,
            exchange.call.tool_name,
            exchange.call.arguments,
            exchange.result.ok,
            exchange.result.output,
        );
    }
    println!(
        "final answer: {:?} (finish: {:?})",
        trajectory.extracted_answer, trajectory.finish_reason
    );
    Ok(())
}
