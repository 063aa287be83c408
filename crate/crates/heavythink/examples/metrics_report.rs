//! Compute M@K / P@K / V@K / HM@K / HP@K and the pass-rate bucket analysis
//! over synthetic per-query evaluations.
//!
//! ```bash
//! cargo run --example metrics_report
//! ```

use heavythink::metrics::{bucket_analysis, MetricsReport, QueryEvaluation};
use heavythink::rng::SplitMix64;
use heavythink::trajectory::DomainTag;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = SplitMix64::new(2027);
    let mut evals = Vec::new();
    for i in 0..40 {
        // Queries get harder as i grows; the deliberator recovers some of
        // the hard ones.
        let difficulty = i as f64 / 40.0;
        let trajectory: Vec<Option<String>> = (0..16)
            .map(|_| {
                Some(if rng.next_f64() > difficulty { "1" } else { "0" }.to_string())
            })
            .collect();
        let deliberation: Vec<Option<String>> = (0..4)
            .map(|_| {
                Some(if rng.next_f64() > difficulty * 0.7 { "1" } else { "0" }.to_string())
            })
            .collect();
        evals.push(QueryEvaluation::from_answers(
            &format!("q{i:02}"),
            DomainTag::Math,
            Some("1".to_string()),
            trajectory,
            deliberation,
            7,
            0.0,
        ));
    }

    let report = MetricsReport::compute(evals, 16, 4, 7, 0.0)?;
    print!("{}", report.render_table());

    println!("\npass-rate buckets (heavy pass-rate histogram per bucket):");
    for bucket in bucket_analysis(&report.per_query, 4)? {
        let histogram: Vec<String> = bucket
            .heavy_pass_distribution
            .iter()
            .map(|bin| format!("{:.2}x{}", bin.rate, bin.count))
            .collect();
        println!(
            "  bucket {:>5}: {:2} queries  [{}]",
            bucket.label,
            bucket.query_ids.len(),
            histogram.join(", ")
        );
    }
    Ok(())
}
