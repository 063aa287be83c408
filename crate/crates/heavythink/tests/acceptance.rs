//! Acceptance suite: one test per criterion, each printing a PASS line.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.
//!
//! Every expected value is either computed by an independent oracle inside
//! the test (brute force, closed form, step-replay of the stated rule) or
//! asserted directly where trivial.

use std::collections::BTreeMap;
use std::path::Path;

use heavythink::cache::{build_cache, CacheBudget};
use heavythink::deliberation::{deliberate, iterate, DeliberationConfig};
use heavythink::metrics::{
    bucket_analysis, heavy_mean_at_k, heavy_pass_at_k, mean_at_k, pass_at_k, verify, vote_at_k,
    vote_winner, MetricsReport, QueryEvaluation,
};
use heavythink::orchestrator::{
    export_rl_caches, run_benchmark, run_pipeline, PipelineMode, ProviderSpec, RlExportRecord,
    RunConfig, Seeds,
};
use heavythink::provider::{MockOutcome, MockRule, RetryPolicy, ScriptedMock};
use heavythink::rng::SplitMix64;
use heavythink::selection::{select, SelectionSpec, SelectionStrategy};
use heavythink::skill::{emit_skill, validate_skill, SkillFinding};
use heavythink::tool_loop::{
    builtin_arithmetic_executor, run_tool_interleaved, ToolLoopConfig,
};
use heavythink::trajectory::{generate_parallel, DomainTag, Query, Trajectory, TrajectorySet};
use heavythink::{FinishReason, SamplingParams};

fn boxed(value: &str) -> String {
    format!("\\boxed{{{value}}}")
}

fn random_answer(rng: &mut SplitMix64, pool: &[&str], none_chance: f64) -> Option<String> {
    if rng.next_f64() < none_chance {
        None
    } else {
        Some(pool[rng.next_below(pool.len() as u64) as usize].to_string())
    }
}

// Criterion 1: per-query metric identities on 1,000 randomized fixtures.
#[test]
fn acceptance_01_metric_identities() {
    let mut rng = SplitMix64::new(101);
    let pool = ["1", "2", "3", "4"];
    let mut evals = Vec::new();
    for i in 0..1000 {
        let k = 1 + rng.next_below(16) as usize;
        let k1 = 1 + rng.next_below(8) as usize;
        let reference = Some(pool[rng.next_below(4) as usize].to_string());
        let trajectory: Vec<Option<String>> =
            (0..k).map(|_| random_answer(&mut rng, &pool, 0.1)).collect();
        let deliberation: Vec<Option<String>> =
            (0..k1).map(|_| random_answer(&mut rng, &pool, 0.1)).collect();
        evals.push(QueryEvaluation::from_answers(
            &format!("q{i}"),
            DomainTag::Math,
            reference,
            trajectory,
            deliberation,
            7,
            0.0,
        ));
    }

    let mut violations = 0;
    for eval in &evals {
        let pass = eval.trajectory_verdicts.iter().any(|&v| v);
        let mean = eval.parallel_pass_rate;
        let vote_ok = match (&eval.vote_answer, &eval.reference_answer) {
            (Some(candidate), Some(reference)) => {
                verify(candidate, reference, eval.domain_tag, 0.0).correct
            }
            _ => false,
        };
        let heavy_pass = eval.deliberation_verdicts.iter().any(|&v| v);
        let heavy_mean = eval.heavy_pass_rate();
        if (vote_ok && !pass) || mean > (pass as u8) as f64 || heavy_mean > (heavy_pass as u8) as f64
        {
            violations += 1;
        }
    }
    assert_eq!(violations, 0, "per-query identity violations");

    let mean = mean_at_k(&evals).unwrap();
    let pass = pass_at_k(&evals).unwrap();
    let vote = vote_at_k(&evals, 7, 0.0).unwrap();
    let hm = heavy_mean_at_k(&evals).unwrap();
    let hp = heavy_pass_at_k(&evals).unwrap();
    for value in [mean, pass, vote, hm, hp] {
        assert!((0.0..=1.0).contains(&value));
    }
    assert!(pass >= vote && pass >= mean && hp >= hm);

    println!("ACCEPTANCE 1 PASS: metric identities hold on 1000 randomized fixtures (0 violations)");
}

// Criterion 2: Bernoulli oracle through the full provider path.
#[tokio::test]
async fn acceptance_02_bernoulli_oracle() {
    let mock = ScriptedMock::new(
        vec![MockRule::any().outcome(MockOutcome::Bernoulli {
            p: 0.5,
            hit: boxed("1"),
            miss: boxed("0"),
        })],
        424_242,
    );
    let sampling = SamplingParams::default();
    let retry = RetryPolicy::immediate(1);
    let mut evals = Vec::with_capacity(2000);
    for i in 0..2000 {
        let query = Query::new(format!("q{i}"), format!("problem {i}"), DomainTag::Math)
            .with_reference("1");
        let set = generate_parallel(&query, 8, &mock, &sampling, 8, &retry).await.unwrap();
        let answers: Vec<Option<String>> =
            set.trajectories.iter().map(|t| t.extracted_answer.clone()).collect();
        evals.push(QueryEvaluation::from_answers(
            &query.query_id,
            DomainTag::Math,
            Some("1".to_string()),
            answers,
            vec![Some("1".to_string())],
            0,
            0.0,
        ));
    }
    // Closed-form Bernoulli oracle: P@8 = 1 - 0.5^8, M@8 = 0.5.
    let expected_pass = 1.0 - 0.5f64.powi(8);
    let pass = pass_at_k(&evals).unwrap();
    let mean = mean_at_k(&evals).unwrap();
    assert!(
        (pass - expected_pass).abs() < 0.01,
        "P@8 {pass} vs closed form {expected_pass}"
    );
    assert!((mean - 0.5).abs() < 0.02, "M@8 {mean} vs 0.5");

    println!(
        "ACCEPTANCE 2 PASS: Bernoulli oracle P@8={pass:.5} (target {expected_pass:.5} ±0.01), \
         M@8={mean:.5} (target 0.5 ±0.02)"
    );
}

// Criterion 3: a deliberator that answers with the majority trajectory
// answer makes HM@4 equal V@K exactly.
#[tokio::test]
async fn acceptance_03_majority_deliberator_identity() {
    let sampling = SamplingParams::default();
    let retry = RetryPolicy::immediate(1);
    for tie_seed in [0u64, 9, 123] {
        let mut rng = SplitMix64::new(300 + tie_seed);
        let mut evals = Vec::new();
        for i in 0..50 {
            let query_id = format!("q{i:03}");
            let query = Query::new(&query_id, format!("fixture {query_id}"), DomainTag::Math)
                .with_reference("1");
            let answers: Vec<String> = (0..8)
                .map(|_| (1 + rng.next_below(3)).to_string())
                .collect();
            let outcomes: Vec<MockOutcome> =
                answers.iter().map(|a| MockOutcome::text(boxed(a))).collect();
            let thinker = ScriptedMock::new(vec![MockRule::any().outcomes(outcomes)], 0);
            let set = generate_parallel(&query, 8, &thinker, &sampling, 4, &retry).await.unwrap();

            let extracted: Vec<Option<String>> =
                set.trajectories.iter().map(|t| t.extracted_answer.clone()).collect();
            let majority =
                vote_winner(&extracted, &query_id, tie_seed).expect("answers all present");
            let deliberator = ScriptedMock::always(boxed(&majority));

            let cache = build_cache(&set, &CacheBudget::default(), 1).unwrap();
            let outputs = deliberate(
                &cache,
                &query,
                4,
                &deliberator,
                &sampling,
                heavythink::DEFAULT_TEMPLATE_ID,
                &heavythink::TemplateStore::builtin(),
                &retry,
            )
            .await
            .unwrap();
            evals.push(QueryEvaluation::evaluate(&query, &set, &outputs, tie_seed, 0.0));
        }
        let hm = heavy_mean_at_k(&evals).unwrap();
        let vote = vote_at_k(&evals, tie_seed, 0.0).unwrap();
        assert_eq!(
            hm.to_bits(),
            vote.to_bits(),
            "HM@4 {hm} != V@K {vote} at tie_seed {tie_seed}"
        );
    }
    println!("ACCEPTANCE 3 PASS: majority deliberator gives HM@4 == V@K bitwise on every fixture");
}

fn synthetic_trajectory(id: &str, thinking: &str, answer: &str) -> Trajectory {
    Trajectory {
        trajectory_id: id.to_string(),
        query_id: "q".to_string(),
        thinking: thinking.to_string(),
        answer_content: answer.to_string(),
        extracted_answer: Some(answer.chars().take(6).collect()),
        extraction_ok: true,
        finish_reason: FinishReason::Stop,
        token_count: 0,
        tool_transcript: Vec::new(),
        sampling: SamplingParams::default(),
    }
}

// Criterion 4: cache integrity over 500 random sets and seeds.
#[test]
fn acceptance_04_cache_integrity() {
    let mut rng = SplitMix64::new(404);
    let sentinel = "THINKING-SENTINEL-XYZZY";
    for case in 0..500 {
        let n = 1 + rng.next_below(24) as usize;
        let trajectories: Vec<Trajectory> = (0..n)
            .map(|i| {
                let answer_len = rng.next_below(300) as usize;
                let answer: String = (0..answer_len)
                    .map(|_| (b'a' + rng.next_below(26) as u8) as char)
                    .collect();
                synthetic_trajectory(
                    &format!("t{i:03}"),
                    &format!("{sentinel} hidden chain {i}"),
                    &answer,
                )
            })
            .collect();
        let set = TrajectorySet {
            query_id: "q".to_string(),
            trajectories,
            fan_out: n as u32,
            failures: Vec::new(),
        };
        let max_total = (n as u64 * (1 + rng.next_below(300))) as usize;
        let per_trajectory = (1 + rng.next_below(200) as usize).min(max_total);
        let budget = CacheBudget {
            max_total_chars: max_total,
            per_trajectory_max_chars: per_trajectory,
            truncation_marker: "<cut>".to_string(),
        };
        let seed = rng.next_u64();
        let cache = build_cache(&set, &budget, seed)
            .unwrap_or_else(|e| panic!("case {case}: {e}"));

        // Independent expected contents: the documented truncation rule.
        let cap = per_trajectory.min(max_total / n);
        let mut expected: Vec<String> = set
            .trajectories
            .iter()
            .map(|t| {
                let chars: Vec<char> = t.answer_content.chars().collect();
                if chars.len() > cap {
                    format!("{}<cut>", chars[..cap].iter().collect::<String>())
                } else {
                    t.answer_content.clone()
                }
            })
            .collect();
        let mut actual: Vec<String> = cache.entries.iter().map(|e| e.content.clone()).collect();
        expected.sort();
        actual.sort();
        assert_eq!(expected, actual, "case {case}: multiset mismatch");

        assert!(!cache.serialized.contains(sentinel), "case {case}: thinking leaked");

        let content_chars: usize = cache
            .entries
            .iter()
            .map(|e| e.content.strip_suffix("<cut>").unwrap_or(&e.content).chars().count())
            .sum();
        assert!(content_chars <= max_total, "case {case}: content over budget");
        assert!(
            cache.serialized.chars().count() <= max_total + cache.framing_overhead(&budget),
            "case {case}: serialized over budget plus framing"
        );

        let slots: Vec<usize> = cache.entries.iter().map(|e| e.slot_index).collect();
        assert_eq!(slots, (1..=n).collect::<Vec<_>>(), "case {case}: slot indices");
    }
    println!("ACCEPTANCE 4 PASS: 500 random caches are content-preserving, leak-free, budgeted");
}

// Criterion 5: iterative cache growth follows K + sum of earlier fan-outs.
#[tokio::test]
async fn acceptance_05_iterative_cache_growth() {
    async fn check_growth(k: u32, fanouts: Vec<u32>) {
        let sampling = SamplingParams::default();
        let retry = RetryPolicy::immediate(1);
        let query = Query::new("q", "growth fixture", DomainTag::Math).with_reference("1");
        let thinker = ScriptedMock::always(boxed("1"));
        let set = generate_parallel(&query, k, &thinker, &sampling, 8, &retry).await.unwrap();
        let deliberator = ScriptedMock::always(boxed("1"));
        let config = DeliberationConfig {
            rounds: fanouts.len() as u32,
            round_fanouts: fanouts.clone(),
            ..DeliberationConfig::default()
        };
        let result = iterate(
            &query,
            &set,
            &config,
            &deliberator,
            &CacheBudget::default(),
            3,
            &heavythink::TemplateStore::builtin(),
            &retry,
        )
        .await
        .unwrap();
        assert!(result.aborted_at.is_none());
        let counts: Vec<usize> = result.rounds.iter().map(|r| r.input_cache.len()).collect();
        // Closed form: round-t entries = K + sum_{j<t} K^(j).
        let expected: Vec<usize> = (0..fanouts.len())
            .map(|t| k as usize + fanouts[..t].iter().sum::<u32>() as usize)
            .collect();
        assert_eq!(counts, expected, "K={k}, fanouts {fanouts:?}");
    }

    let mut rng = SplitMix64::new(505);
    for _ in 0..100 {
        let k = 1 + rng.next_below(8) as u32;
        let rounds = 1 + rng.next_below(4) as usize;
        let fanouts: Vec<u32> = (0..rounds).map(|_| 1 + rng.next_below(6) as u32).collect();
        check_growth(k, fanouts).await;
    }
    // The documented setup: K=8, all fan-outs 8, N=4 -> 8/16/24/32.
    check_growth(8, vec![8, 8, 8, 8]).await;

    println!("ACCEPTANCE 5 PASS: 100 random configs + K=8/N=4 setup grow caches 8/16/24/32");
}

// ---- Criterion 6 oracles: independent step-replay implementations ----

fn oracle_max_length(pool: &[Trajectory], k: usize) -> Vec<String> {
    let mut remaining: Vec<&Trajectory> = pool.iter().collect();
    let mut picks = Vec::new();
    for _ in 0..k {
        let mut best = 0;
        for i in 1..remaining.len() {
            let len_i =
                remaining[i].thinking.chars().count() + remaining[i].answer_content.chars().count();
            let len_b = remaining[best].thinking.chars().count()
                + remaining[best].answer_content.chars().count();
            if len_i > len_b
                || (len_i == len_b && remaining[i].trajectory_id < remaining[best].trajectory_id)
            {
                best = i;
            }
        }
        picks.push(remaining.remove(best).trajectory_id.clone());
    }
    picks
}

fn oracle_max_answer_num(pool: &[Trajectory], k: usize) -> Vec<String> {
    let mut remaining: Vec<&Trajectory> = pool.iter().collect();
    let mut picks = Vec::new();
    for _ in 0..k {
        let freq = |t: &Trajectory| {
            pool.iter().filter(|o| o.extracted_answer == t.extracted_answer).count()
        };
        let mut best = 0;
        for i in 1..remaining.len() {
            let (fi, fb) = (freq(remaining[i]), freq(remaining[best]));
            if fi > fb
                || (fi == fb && remaining[i].trajectory_id < remaining[best].trajectory_id)
            {
                best = i;
            }
        }
        picks.push(remaining.remove(best).trajectory_id.clone());
    }
    picks
}

/// Independent shingle distance built on HashSet rather than BTreeSet.
fn oracle_distance(a: &str, b: &str) -> f64 {
    use std::collections::HashSet;
    let shingle = |s: &str| -> HashSet<String> {
        let chars: Vec<char> = s.chars().collect();
        if chars.is_empty() {
            return HashSet::new();
        }
        if chars.len() < 4 {
            return HashSet::from([s.to_string()]);
        }
        (0..=chars.len() - 4).map(|i| chars[i..i + 4].iter().collect()).collect()
    };
    let (sa, sb) = (shingle(a), shingle(b));
    if sa.is_empty() && sb.is_empty() {
        return 0.0;
    }
    let intersection = sa.intersection(&sb).count() as f64;
    let union = (sa.len() + sb.len()) as f64 - intersection;
    1.0 - intersection / union
}

fn oracle_max_diversity(pool: &[Trajectory], k: usize) -> Vec<String> {
    let mut remaining: Vec<&Trajectory> = pool.iter().collect();
    remaining.sort_by(|a, b| a.trajectory_id.cmp(&b.trajectory_id));
    let mut chosen = vec![remaining.remove(0)];
    while chosen.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for (i, candidate) in remaining.iter().enumerate() {
            let mut min_distance = f64::INFINITY;
            for picked in &chosen {
                min_distance = min_distance
                    .min(oracle_distance(&candidate.answer_content, &picked.answer_content));
            }
            let better = match best {
                None => true,
                Some((bi, bd)) => {
                    min_distance > bd + 1e-12
                        || ((min_distance - bd).abs() <= 1e-12
                            && candidate.trajectory_id < remaining[bi].trajectory_id)
                }
            };
            if better {
                best = Some((i, min_distance));
            }
        }
        chosen.push(remaining.remove(best.unwrap().0));
    }
    chosen.iter().map(|t| t.trajectory_id.clone()).collect()
}

// Criterion 6: selection strategies match their oracles on all pools <= 8.
#[test]
fn acceptance_06_selection_oracles() {
    let mut rng = SplitMix64::new(606);
    let words = ["alpha", "beta", "gamma", "delta", "omega"];
    let answers = ["A", "B", "C"];
    let mut cases = 0;
    for size in 2..=8usize {
        for k in 1..=4usize.min(size) {
            for _ in 0..12 {
                let pool: Vec<Trajectory> = (0..size)
                    .map(|i| {
                        let word_count = 1 + rng.next_below(6) as usize;
                        let answer_content: Vec<&str> = (0..word_count)
                            .map(|_| words[rng.next_below(words.len() as u64) as usize])
                            .collect();
                        let mut t = synthetic_trajectory(
                            &format!("t{i:03}"),
                            "",
                            &answer_content.join(" "),
                        );
                        t.extracted_answer =
                            Some(answers[rng.next_below(3) as usize].to_string());
                        t
                    })
                    .collect();
                let set = TrajectorySet {
                    query_id: "q".to_string(),
                    trajectories: pool.clone(),
                    fan_out: size as u32,
                    failures: Vec::new(),
                };
                let pick_ids = |strategy: SelectionStrategy| -> Vec<String> {
                    select(&set, &SelectionSpec { strategy, k, seed: 0 })
                        .unwrap()
                        .trajectories
                        .iter()
                        .map(|t| t.trajectory_id.clone())
                        .collect()
                };
                assert_eq!(
                    pick_ids(SelectionStrategy::MaxLength),
                    oracle_max_length(&pool, k),
                    "max-length mismatch (n={size}, k={k})"
                );
                assert_eq!(
                    pick_ids(SelectionStrategy::MaxAnswerNum),
                    oracle_max_answer_num(&pool, k),
                    "max-answer-num mismatch (n={size}, k={k})"
                );
                assert_eq!(
                    pick_ids(SelectionStrategy::MaxDiversity),
                    oracle_max_diversity(&pool, k),
                    "max-diversity mismatch (n={size}, k={k})"
                );
                cases += 3;
            }
        }
    }
    println!("ACCEPTANCE 6 PASS: selection strategies match enumeration oracles ({cases} cases)");
}

// Criterion 7: tool loop arithmetic fixtures plus the 50-round cap.
#[tokio::test]
async fn acceptance_07_tool_loop() {
    use num_bigint::BigInt;

    // Independent oracle values computed with direct big-integer arithmetic,
    // never through the executor's parser.
    let two = BigInt::from(2);
    let fixtures: Vec<(&str, String)> = vec![
        ("2**10", two.pow(10).to_string()),
        ("(3+4)*5", BigInt::from((3 + 4) * 5).to_string()),
        ("2**64", two.pow(64).to_string()),
        ("123456789*987654321", (BigInt::from(123_456_789u64) * BigInt::from(987_654_321u64)).to_string()),
        ("10/4", "5/2".to_string()),
        ("1+2*3-4/2", BigInt::from(1 + 2 * 3 - 4 / 2).to_string()),
        ("-7*-3", BigInt::from(21).to_string()),
        ("(1+2)*(3+4)", BigInt::from(21).to_string()),
        ("2**3**2", two.pow(9).to_string()),
        ("1000000007*998244353", (BigInt::from(1_000_000_007u64) * BigInt::from(998_244_353u64)).to_string()),
        ("7/2/2", "7/4".to_string()),
        ("5-3-1", BigInt::from(1).to_string()),
        ("2*(3+4*(5+6))", BigInt::from(2 * (3 + 4 * (5 + 6))).to_string()),
        ("0**0", BigInt::from(1).to_string()),
        ("9/3", BigInt::from(3).to_string()),
        ("(10-4)/(1+2)", BigInt::from(2).to_string()),
        ("2**-3", "1/8".to_string()),
        ("100-200", BigInt::from(-100).to_string()),
        ("17", BigInt::from(17).to_string()),
        ("3**5*2", (BigInt::from(3).pow(5) * BigInt::from(2)).to_string()),
    ];
    assert_eq!(fixtures.len(), 20);

    let sampling = SamplingParams::default();
    let retry = RetryPolicy::immediate(1);
    let config = ToolLoopConfig::new(builtin_arithmetic_executor());
    let mut correct = 0;
    for (expression, expected) in &fixtures {
        let call = format!(
            "<tool_call>{{\"name\":\"calculator\",\"arguments\":{}}}</tool_call>",
            serde_json::to_string(expression).unwrap()
        );
        let thinker = ScriptedMock::new(
            vec![MockRule::any().outcomes(vec![
                MockOutcome::tool_call(call),
                MockOutcome::text(boxed("done")),
            ])],
            0,
        );
        let query = Query::new("q", format!("compute {expression}"), DomainTag::Math);
        let trajectory =
            run_tool_interleaved(&query, 0, &thinker, &config, &sampling, &retry).await.unwrap();
        assert_eq!(trajectory.tool_transcript.len(), 1);
        let exchange = &trajectory.tool_transcript[0];
        assert!(exchange.result.ok, "{expression}: {}", exchange.result.output);
        assert_eq!(&exchange.result.output, expected, "{expression}");
        correct += 1;
    }
    assert_eq!(correct, 20);

    // A thinker that never stops tool-calling halts at exactly 50 rounds.
    let relentless = ScriptedMock::new(
        vec![MockRule::any().outcome(MockOutcome::tool_call(
            "<tool_call>{\"name\":\"calculator\",\"arguments\":\"1+1\"}</tool_call>",
        ))],
        0,
    );
    let query = Query::new("q", "never stop", DomainTag::Math);
    let trajectory =
        run_tool_interleaved(&query, 0, &relentless, &config, &sampling, &retry).await.unwrap();
    assert_eq!(trajectory.tool_transcript.len(), 50);
    assert_eq!(trajectory.finish_reason, FinishReason::Length);

    println!("ACCEPTANCE 7 PASS: 20/20 tool results match the big-integer oracle; cap stops at 50");
}

// Criterion 8: skill round trip and per-directive findings.
#[test]
fn acceptance_08_skill_round_trip() {
    let skill = emit_skill(8, 4, &[]);
    assert!(validate_skill(&skill).is_empty());

    let remove_phrase = |text: &str, phrase: &str| -> String {
        let lower = text.to_lowercase();
        let needle = phrase.to_lowercase();
        let mut result = String::new();
        let mut from = 0;
        while let Some(found) = lower[from..].find(&needle) {
            let at = from + found;
            result.push_str(&text[from..at]);
            from = at + needle.len();
        }
        result.push_str(&text[from..]);
        result
    };

    for (name, phrase) in heavythink::cache::directives::ALL {
        let findings = validate_skill(&remove_phrase(&skill, phrase));
        assert_eq!(findings.len(), 1, "removing {name} produced {findings:?}");
        assert_eq!(
            findings[0],
            SkillFinding::MissingDirective { directive: name.to_string() },
            "finding must name {name}"
        );
    }
    println!("ACCEPTANCE 8 PASS: emitted skill validates clean; each removed directive yields one named finding");
}

fn determinism_fixture(dir: &Path) -> RunConfig {
    let dataset = dir.join("queries.jsonl");
    let lines: Vec<String> = (0..6)
        .map(|i| {
            format!(
                r#"{{"query_id":"q{i}","text":"problem number {i}","reference_answer":"{}","domain_tag":"math"}}"#,
                i % 3
            )
        })
        .collect();
    std::fs::write(&dataset, lines.join("\n")).unwrap();
    RunConfig {
        dataset,
        run_dir: dir.join("run"),
        k: 8,
        max_in_flight: 4,
        query_parallelism: 1,
        verify_tolerance: 0.0,
        seeds: Seeds::default(),
        thinker: ProviderSpec::Mock {
            seed: 77,
            rules: vec![MockRule::any().outcome(MockOutcome::Bernoulli {
                p: 0.5,
                hit: boxed("0"),
                miss: boxed("1"),
            })],
            supports_n: None,
        },
        deliberator: Some(ProviderSpec::Mock {
            seed: 78,
            rules: vec![MockRule::any()
                .outcomes(vec![
                    MockOutcome::text(boxed("0")),
                    MockOutcome::text(boxed("1")),
                    MockOutcome::text(boxed("2")),
                ])
                .cycle()],
            supports_n: None,
        }),
        deliberation: DeliberationConfig::uniform(2, 4),
        budget: CacheBudget::default(),
        sampling: SamplingParams::default(),
        selection: None,
        tool_loop: None,
        retry: RetryPolicy::immediate(2),
        templates_dir: None,
    }
}

// Criterion 9: determinism across fresh runs; resumability with zero calls.
#[tokio::test]
async fn acceptance_09_determinism_and_resumability() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let config_a = determinism_fixture(dir_a.path());
    let config_b = determinism_fixture(dir_b.path());

    run_benchmark(&config_a).await.unwrap();
    run_benchmark(&config_b).await.unwrap();
    let report_a = std::fs::read(config_a.run_dir.join("report.json")).unwrap();
    let report_b = std::fs::read(config_b.run_dir.join("report.json")).unwrap();
    assert_eq!(report_a, report_b, "fresh runs with identical seeds must match byte for byte");

    let outcome = run_pipeline(&config_a, PipelineMode::Full).await.unwrap();
    assert_eq!(outcome.thinker.call_count(), Some(0), "resume must issue zero thinker calls");
    assert_eq!(outcome.deliberator.call_count(), Some(0), "resume must issue zero deliberator calls");
    let report_resumed = std::fs::read(config_a.run_dir.join("report.json")).unwrap();
    assert_eq!(report_a, report_resumed);

    println!("ACCEPTANCE 9 PASS: byte-identical reports across runs; resume issues zero provider calls");
}

// Criterion 10: RL export on the {0.0, 0.5, 0.625, 0.8} pass-rate fixture.
#[test]
fn acceptance_10_rl_export() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    std::fs::create_dir_all(run_dir.join("trajectories")).unwrap();

    // Four queries with 40 trajectories each; correct counts 0/20/25/32
    // give pass rates exactly 0.0, 0.5, 0.625, 0.8.
    let correct_counts = [0usize, 20, 25, 32];
    let mut queries_lines = Vec::new();
    let mut evals = Vec::new();
    for (qi, &correct) in correct_counts.iter().enumerate() {
        let query_id = format!("q{qi}");
        queries_lines.push(format!(
            r#"{{"query_id":"{query_id}","text":"fixture {qi}","reference_answer":"1","domain_tag":"math"}}"#
        ));
        let trajectories: Vec<Trajectory> = (0..40)
            .map(|i| {
                let answer = if i < correct { "1" } else { "9" };
                let mut t = synthetic_trajectory(
                    &format!("t{i:03}"),
                    "",
                    &format!("answer content {i}: {answer}"),
                );
                t.query_id = query_id.clone();
                t.extracted_answer = Some(answer.to_string());
                t
            })
            .collect();
        let answers: Vec<Option<String>> =
            trajectories.iter().map(|t| t.extracted_answer.clone()).collect();
        let body: Vec<String> =
            trajectories.iter().map(|t| serde_json::to_string(t).unwrap()).collect();
        std::fs::write(
            run_dir.join(format!("trajectories/{query_id}.jsonl")),
            body.join("\n"),
        )
        .unwrap();
        evals.push(QueryEvaluation::from_answers(
            &query_id,
            DomainTag::Math,
            Some("1".to_string()),
            answers,
            vec![Some("1".to_string())],
            0,
            0.0,
        ));
    }
    std::fs::write(run_dir.join("queries.jsonl"), queries_lines.join("\n")).unwrap();

    let rates: Vec<f64> = evals.iter().map(|e| e.parallel_pass_rate).collect();
    assert_eq!(rates, vec![0.0, 0.5, 0.625, 0.8]);

    let metrics = MetricsReport::compute(evals, 40, 1, 0, 0.0).unwrap();
    let buckets = bucket_analysis(&metrics.per_query, 1).unwrap();
    let report = heavythink::FullReport {
        metadata: heavythink::orchestrator::RunMetadata {
            k: 40,
            k1: 1,
            rounds: 1,
            seeds: Seeds::default(),
            verify_tolerance: 0.0,
            selection: None,
            bucket_edges: heavythink::metrics::BUCKET_EDGES.to_string(),
            query_errors: BTreeMap::new(),
            unverifiable_queries: 0,
        },
        metrics,
        buckets,
    };
    std::fs::write(
        run_dir.join("report.json"),
        serde_json::to_string_pretty(&report).unwrap(),
    )
    .unwrap();

    let out = dir.path().join("rl.jsonl");
    let count = export_rl_caches(&run_dir, (0.0, 0.625), &[8, 16], 11, &out).unwrap();
    assert_eq!(count, 3, "0.8 sits outside the closed interval");

    let records: Vec<RlExportRecord> = std::fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let ids: Vec<&str> = records.iter().map(|r| r.query_id.as_str()).collect();
    assert_eq!(ids, vec!["q0", "q1", "q2"]);
    for record in &records {
        assert!(
            record.k == 8 || record.k == 16,
            "entry count {} outside {{8,16}}",
            record.k
        );
        assert_eq!(record.source_trajectory_ids.len(), record.k);
        assert_eq!(record.reference_answer.as_deref(), Some("1"));
        assert!(record.prompt.contains("Trajectory 1:"));
    }

    let out2 = dir.path().join("rl-again.jsonl");
    export_rl_caches(&run_dir, (0.0, 0.625), &[8, 16], 11, &out2).unwrap();
    assert_eq!(
        std::fs::read(&out).unwrap(),
        std::fs::read(&out2).unwrap(),
        "same seed must reproduce records byte for byte"
    );

    println!("ACCEPTANCE 10 PASS: export emits exactly 3 records, entry counts in {{8,16}}, reruns reproduce");
}
