//! Build a serialized memory cache from trajectories: thinking is pruned,
//! entries are budgeted and shuffled, and the deliberation prompt renders
//! around them.
//!
//! ```bash
//! cargo run --example memory_cache
//! ```

use heavythink::cache::{build_cache, render_deliberation_prompt, CacheBudget, TemplateStore};
use heavythink::provider::{RetryPolicy, ScriptedMock};
use heavythink::trajectory::{generate_parallel, DomainTag, Query};
use heavythink::{SamplingParams, DEFAULT_TEMPLATE_ID};

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let thinker = ScriptedMock::always(
        "<think>long internal monologue that never reaches the deliberator</think>\
         After simplification the result is \\boxed{42}.",
    );
    let query = Query::new("demo-2", "Simplify 6 × 7.", DomainTag::Math);
    let set = generate_parallel(
        &query,
        6,
        &thinker,
        &SamplingParams::default(),
        4,
        &RetryPolicy::default(),
    )
    .await?;

    let budget = CacheBudget {
        max_total_chars: 400,
        per_trajectory_max_chars: 48,
        truncation_marker: " …[truncated]".into(),
    };
    let cache = build_cache(&set, &budget, 7)?;

    println!("{} entries, shuffle seed {}\n", cache.len(), cache.shuffle_seed);
    for entry in &cache.entries {
        println!(
            "  slot {} <- {}  truncated={}  {:?}",
            entry.slot_index, entry.source_trajectory_id, entry.truncated, entry.content
        );
    }

    let prompt =
        render_deliberation_prompt(&cache, &query, DEFAULT_TEMPLATE_ID, &TemplateStore::builtin())?;
    println!("\n--- rendered deliberation prompt ---\n{prompt}");
    Ok(())
}
