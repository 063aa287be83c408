//! Answer verification and the five evaluation metrics, plus the pass-rate
//! bucket analysis.
//!
//! - `M@K` — macro-averaged mean accuracy of the K parallel trajectories.
//! - `P@K` — fraction of queries with at least one correct trajectory (the
//!   plain empirical indicator; the unbiased combinatorial estimator is
//!   available separately as [`unbiased_pass_at_k`]).
//! - `V@K` — accuracy of the most frequent extracted answer, ties broken by
//!   earliest occurrence in a seed-shuffled trajectory order.
//! - `HM@K` / `HP@K` — the same mean/any-correct aggregations over the
//!   deliberation outputs of the second phase.
//!
//! All aggregates macro-average over queries (each query weighted equally),
//! and every stochastic tie-break derives its stream from
//! `(tie_seed, query_id)` so metrics are invariant to query order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::deliberation::DeliberationOutput;
use crate::rng::{keyed_seed, SplitMix64};
use crate::trajectory::{DomainTag, Query, TrajectorySet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictRule {
    Exact,
    Numeric,
    Letter,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub correct: bool,
    pub normalized_candidate: String,
    pub normalized_reference: String,
    pub rule_applied: VerdictRule,
}

/// Trim, strip trailing punctuation, and case-fold single-letter options.
pub fn normalize_answer(raw: &str) -> String {
    let trimmed = raw.trim();
    let stripped = trimmed.trim_end_matches(['.', ',', ';', ':', '!', '?']);
    let stripped = stripped.trim();
    let mut chars = stripped.chars();
    match (chars.next(), chars.next()) {
        (Some(only), None) if only.is_alphabetic() => only.to_uppercase().collect(),
        _ => stripped.to_string(),
    }
}

/// Parse an integer, decimal, or `a/b` fraction as an exact rational.
pub fn parse_number(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if let Some((numerator, denominator)) = text.split_once('/') {
        let n = parse_decimal(numerator.trim())?;
        let d = parse_decimal(denominator.trim())?;
        if d.is_zero() {
            return None;
        }
        return Some(n / d);
    }
    parse_decimal(text)
}

fn parse_decimal(text: &str) -> Option<BigRational> {
    if text.is_empty() {
        return None;
    }
    let (sign, digits) = match text.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, text.strip_prefix('+').unwrap_or(text)),
    };
    if digits.is_empty() {
        return None;
    }
    let (integer_part, fraction_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if integer_part.is_empty() && fraction_part.is_empty() {
        return None;
    }
    if !integer_part.chars().all(|c| c.is_ascii_digit())
        || !fraction_part.chars().all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let combined = format!(
        "{}{}",
        if integer_part.is_empty() { "0" } else { integer_part },
        fraction_part
    );
    let numerator: BigInt = combined.parse().ok()?;
    let denominator = BigInt::from(10u32).pow(fraction_part.len() as u32);
    Some(BigRational::new(numerator * sign, denominator))
}

/// Check a candidate against a reference answer.
///
/// Precedence: exact match of the normalized strings; then the letter rule
/// for multiple choice when both sides are single letters; then numeric
/// comparison with absolute `tolerance` when both sides parse as numbers
/// (tolerance 0 means exact after canonicalization); otherwise exact-rule
/// mismatch. Total function — absence of a rule means incorrect, never an
/// error.
pub fn verify(candidate: &str, reference: &str, domain: DomainTag, tolerance: f64) -> Verdict {
    let normalized_candidate = normalize_answer(candidate);
    let normalized_reference = normalize_answer(reference);

    if normalized_reference.is_empty() {
        return Verdict {
            correct: false,
            normalized_candidate,
            normalized_reference,
            rule_applied: VerdictRule::Exact,
        };
    }
    if normalized_candidate == normalized_reference {
        return Verdict {
            correct: true,
            normalized_candidate,
            normalized_reference,
            rule_applied: VerdictRule::Exact,
        };
    }
    let single = |s: &str| s.chars().count() == 1 && s.chars().all(|c| c.is_alphabetic());
    if domain == DomainTag::MultipleChoice
        && single(&normalized_candidate)
        && single(&normalized_reference)
    {
        return Verdict {
            correct: false,
            normalized_candidate,
            normalized_reference,
            rule_applied: VerdictRule::Letter,
        };
    }
    if let (Some(a), Some(b)) =
        (parse_number(&normalized_candidate), parse_number(&normalized_reference))
    {
        let correct = if tolerance == 0.0 {
            a == b
        } else {
            let tol = BigRational::from_float(tolerance.abs()).unwrap_or_else(BigRational::zero);
            (a - b).abs() <= tol
        };
        return Verdict {
            correct,
            normalized_candidate,
            normalized_reference,
            rule_applied: VerdictRule::Numeric,
        };
    }
    Verdict {
        correct: false,
        normalized_candidate,
        normalized_reference,
        rule_applied: VerdictRule::Exact,
    }
}

/// Per-query evaluation record: verdicts for both phases plus the voting
/// inputs needed to recompute V@K under any tie seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryEvaluation {
    pub query_id: String,
    pub domain_tag: DomainTag,
    #[serde(default)]
    pub reference_answer: Option<String>,
    pub trajectory_answers: Vec<Option<String>>,
    pub trajectory_verdicts: Vec<bool>,
    pub deliberation_verdicts: Vec<bool>,
    #[serde(default)]
    pub vote_answer: Option<String>,
    pub parallel_pass_rate: f64,
}

impl QueryEvaluation {
    /// Evaluate one query from its trajectory set and deliberation outputs.
    pub fn evaluate(
        query: &Query,
        set: &TrajectorySet,
        deliberations: &[DeliberationOutput],
        tie_seed: u64,
        tolerance: f64,
    ) -> Self {
        let trajectory_answers: Vec<Option<String>> =
            set.trajectories.iter().map(|t| t.extracted_answer.clone()).collect();
        let deliberation_answers: Vec<Option<String>> =
            deliberations.iter().map(|o| o.extracted_answer.clone()).collect();
        Self::from_answers(
            &query.query_id,
            query.domain_tag,
            query.reference_answer.clone(),
            trajectory_answers,
            deliberation_answers,
            tie_seed,
            tolerance,
        )
    }

    /// Build an evaluation from raw extracted answers, verifying each one.
    pub fn from_answers(
        query_id: &str,
        domain_tag: DomainTag,
        reference_answer: Option<String>,
        trajectory_answers: Vec<Option<String>>,
        deliberation_answers: Vec<Option<String>>,
        tie_seed: u64,
        tolerance: f64,
    ) -> Self {
        let check = |answer: &Option<String>| -> bool {
            match (answer, &reference_answer) {
                (Some(candidate), Some(reference)) => {
                    verify(candidate, reference, domain_tag, tolerance).correct
                }
                _ => false,
            }
        };
        let trajectory_verdicts: Vec<bool> = trajectory_answers.iter().map(check).collect();
        let deliberation_verdicts: Vec<bool> = deliberation_answers.iter().map(check).collect();
        let vote_answer = vote_winner(&trajectory_answers, query_id, tie_seed);
        let parallel_pass_rate = mean_of_bools(&trajectory_verdicts);
        Self {
            query_id: query_id.to_string(),
            domain_tag,
            reference_answer,
            trajectory_answers,
            trajectory_verdicts,
            deliberation_verdicts,
            vote_answer,
            parallel_pass_rate,
        }
    }

    fn vote_correct(&self, tie_seed: u64, tolerance: f64) -> bool {
        let winner = vote_winner(&self.trajectory_answers, &self.query_id, tie_seed);
        match (&winner, &self.reference_answer) {
            (Some(candidate), Some(reference)) => {
                verify(candidate, reference, self.domain_tag, tolerance).correct
            }
            _ => false,
        }
    }

    pub fn heavy_pass_rate(&self) -> f64 {
        mean_of_bools(&self.deliberation_verdicts)
    }
}

fn mean_of_bools(verdicts: &[bool]) -> f64 {
    if verdicts.is_empty() {
        return 0.0;
    }
    verdicts.iter().filter(|&&v| v).count() as f64 / verdicts.len() as f64
}

/// The most frequent answer; ties broken by earliest first occurrence in
/// the `(tie_seed, query_id)`-shuffled trajectory order. With all answers
/// distinct this degenerates to the first answer in shuffled order. A `None`
/// winner means either no answers or an unextractable majority.
pub fn vote_winner(
    answers: &[Option<String>],
    query_id: &str,
    tie_seed: u64,
) -> Option<String> {
    if answers.is_empty() {
        return None;
    }
    let mut order: Vec<usize> = (0..answers.len()).collect();
    let mut rng = SplitMix64::new(keyed_seed(tie_seed, query_id));
    rng.shuffle(&mut order);

    let mut best: Option<(&Option<String>, usize, usize)> = None; // (answer, count, first_pos)
    for (position, &index) in order.iter().enumerate() {
        let answer = &answers[index];
        let count = answers.iter().filter(|a| *a == answer).count();
        match best {
            Some((_, best_count, best_pos))
                if count < best_count || (count == best_count && position >= best_pos) => {}
            _ => best = Some((answer, count, position)),
        }
    }
    best.and_then(|(answer, _, _)| answer.clone())
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no evaluations to aggregate")]
    EmptyInput,
    #[error("query {query_id} is missing {phase} verdicts")]
    MissingVerdicts { query_id: String, phase: &'static str },
    #[error("k={k} exceeds the {n} samples available for query {query_id}")]
    InvalidK { k: usize, n: usize, query_id: String },
}

fn check_trajectory_verdicts(evals: &[QueryEvaluation]) -> Result<(), MetricsError> {
    if evals.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    for eval in evals {
        if eval.trajectory_verdicts.is_empty() {
            return Err(MetricsError::MissingVerdicts {
                query_id: eval.query_id.clone(),
                phase: "trajectory",
            });
        }
    }
    Ok(())
}

fn check_deliberation_verdicts(evals: &[QueryEvaluation]) -> Result<(), MetricsError> {
    if evals.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    for eval in evals {
        if eval.deliberation_verdicts.is_empty() {
            return Err(MetricsError::MissingVerdicts {
                query_id: eval.query_id.clone(),
                phase: "deliberation",
            });
        }
    }
    Ok(())
}

// Summing in sorted order makes the average exactly invariant under query
// permutation despite float non-associativity.
fn macro_average(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    let mut values: Vec<f64> = values.collect();
    values.sort_by(f64::total_cmp);
    values.into_iter().sum::<f64>() / n as f64
}

/// Mean accuracy over the K trajectories, macro-averaged over queries.
pub fn mean_at_k(evals: &[QueryEvaluation]) -> Result<f64, MetricsError> {
    check_trajectory_verdicts(evals)?;
    Ok(macro_average(
        evals.iter().map(|e| mean_of_bools(&e.trajectory_verdicts)),
        evals.len(),
    ))
}

/// Fraction of queries with at least one correct trajectory.
pub fn pass_at_k(evals: &[QueryEvaluation]) -> Result<f64, MetricsError> {
    check_trajectory_verdicts(evals)?;
    Ok(macro_average(
        evals
            .iter()
            .map(|e| if e.trajectory_verdicts.iter().any(|&v| v) { 1.0 } else { 0.0 }),
        evals.len(),
    ))
}

/// Accuracy of the majority-vote answer under the given tie seed.
pub fn vote_at_k(
    evals: &[QueryEvaluation],
    tie_seed: u64,
    tolerance: f64,
) -> Result<f64, MetricsError> {
    check_trajectory_verdicts(evals)?;
    for eval in evals {
        if eval.trajectory_answers.is_empty() {
            return Err(MetricsError::MissingVerdicts {
                query_id: eval.query_id.clone(),
                phase: "trajectory answer",
            });
        }
    }
    Ok(macro_average(
        evals
            .iter()
            .map(|e| if e.vote_correct(tie_seed, tolerance) { 1.0 } else { 0.0 }),
        evals.len(),
    ))
}

/// Mean accuracy over the deliberation outputs, macro-averaged over queries.
pub fn heavy_mean_at_k(evals: &[QueryEvaluation]) -> Result<f64, MetricsError> {
    check_deliberation_verdicts(evals)?;
    Ok(macro_average(
        evals.iter().map(|e| mean_of_bools(&e.deliberation_verdicts)),
        evals.len(),
    ))
}

/// Fraction of queries with at least one correct deliberation output.
pub fn heavy_pass_at_k(evals: &[QueryEvaluation]) -> Result<f64, MetricsError> {
    check_deliberation_verdicts(evals)?;
    Ok(macro_average(
        evals
            .iter()
            .map(|e| if e.deliberation_verdicts.iter().any(|&v| v) { 1.0 } else { 0.0 }),
        evals.len(),
    ))
}

/// The unbiased combinatorial pass@k estimator `1 - C(n-c,k)/C(n,k)`,
/// offered alongside the plain empirical indicator.
pub fn unbiased_pass_at_k(evals: &[QueryEvaluation], k: usize) -> Result<f64, MetricsError> {
    check_trajectory_verdicts(evals)?;
    let mut per_query = Vec::with_capacity(evals.len());
    for eval in evals {
        let n = eval.trajectory_verdicts.len();
        let c = eval.trajectory_verdicts.iter().filter(|&&v| v).count();
        if k > n {
            return Err(MetricsError::InvalidK { k, n, query_id: eval.query_id.clone() });
        }
        let estimate = if n - c < k {
            1.0
        } else {
            1.0 - (1..=k).fold(1.0_f64, |acc, i| acc * (n - c - k + i) as f64 / (n - k + i) as f64)
        };
        per_query.push(estimate);
    }
    Ok(macro_average(per_query.into_iter(), evals.len()))
}

/// Bucket labels for the pass-rate analysis, midpoints of the quartiles.
pub const BUCKET_LABELS: [f64; 4] = [0.125, 0.375, 0.625, 0.875];

/// Quartile edges: half-open below, closed at 1.0.
pub const BUCKET_EDGES: &str = "[0,0.25) -> 0.125, [0.25,0.5) -> 0.375, [0.5,0.75) -> 0.625, [0.75,1] -> 0.875";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistogramBin {
    pub rate: f64,
    pub count: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PassRateBucket {
    pub label: f64,
    pub query_ids: Vec<String>,
    /// Distribution of per-query heavy pass rates within the bucket.
    pub heavy_pass_distribution: Vec<HistogramBin>,
}

fn bucket_index(pass_rate: f64) -> usize {
    if pass_rate < 0.25 {
        0
    } else if pass_rate < 0.5 {
        1
    } else if pass_rate < 0.75 {
        2
    } else {
        3
    }
}

/// Assign queries to pass-rate buckets and histogram their heavy pass rates
/// (fraction of the `k1` deliberation outputs judged correct).
pub fn bucket_analysis(
    evals: &[QueryEvaluation],
    _k1: u32,
) -> Result<Vec<PassRateBucket>, MetricsError> {
    check_trajectory_verdicts(evals)?;
    check_deliberation_verdicts(evals)?;

    type BucketAccumulator = (Vec<String>, Vec<(u64, u64)>);
    let mut buckets: Vec<BucketAccumulator> = vec![(Vec::new(), Vec::new()); 4];
    for eval in evals {
        let index = bucket_index(eval.parallel_pass_rate);
        let correct = eval.deliberation_verdicts.iter().filter(|&&v| v).count() as u64;
        let total = eval.deliberation_verdicts.len() as u64;
        let gcd = gcd(correct.max(1), total);
        let fraction = if correct == 0 { (0, 1) } else { (correct / gcd, total / gcd) };
        buckets[index].0.push(eval.query_id.clone());
        buckets[index].1.push(fraction);
    }

    Ok(buckets
        .into_iter()
        .enumerate()
        .map(|(index, (query_ids, fractions))| {
            let mut counts: std::collections::BTreeMap<(u64, u64), u64> =
                std::collections::BTreeMap::new();
            for fraction in fractions {
                *counts.entry(fraction).or_default() += 1;
            }
            let mut bins: Vec<HistogramBin> = counts
                .into_iter()
                .map(|((numerator, denominator), count)| HistogramBin {
                    rate: numerator as f64 / denominator as f64,
                    count,
                })
                .collect();
            bins.sort_by(|a, b| a.rate.partial_cmp(&b.rate).expect("rates are finite"));
            PassRateBucket {
                label: BUCKET_LABELS[index],
                query_ids,
                heavy_pass_distribution: bins,
            }
        })
        .collect())
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Aggregate report across both phases.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mean_at_k: f64,
    pub pass_at_k: f64,
    pub vote_at_k: f64,
    pub heavy_mean_at_k: f64,
    pub heavy_pass_at_k: f64,
    pub per_query: Vec<QueryEvaluation>,
    pub k: u32,
    pub k1: u32,
}

impl MetricsReport {
    pub fn compute(
        per_query: Vec<QueryEvaluation>,
        k: u32,
        k1: u32,
        tie_seed: u64,
        tolerance: f64,
    ) -> Result<Self, MetricsError> {
        let mean = mean_at_k(&per_query)?;
        let pass = pass_at_k(&per_query)?;
        let vote = vote_at_k(&per_query, tie_seed, tolerance)?;
        let heavy_mean = heavy_mean_at_k(&per_query)?;
        let heavy_pass = heavy_pass_at_k(&per_query)?;
        Ok(Self {
            mean_at_k: mean,
            pass_at_k: pass,
            vote_at_k: vote,
            heavy_mean_at_k: heavy_mean,
            heavy_pass_at_k: heavy_pass,
            per_query,
            k,
            k1,
        })
    }

    /// Fixed-width table mirroring the usual column names.
    pub fn render_table(&self) -> String {
        let headers = [
            format!("M@{}", self.k),
            format!("P@{}", self.k),
            format!("V@{}", self.k),
            format!("HM@{}", self.k1),
            format!("HP@{}", self.k1),
        ];
        let values = [
            self.mean_at_k,
            self.pass_at_k,
            self.vote_at_k,
            self.heavy_mean_at_k,
            self.heavy_pass_at_k,
        ];
        let mut header_row = String::new();
        let mut value_row = String::new();
        for (header, value) in headers.iter().zip(values) {
            header_row.push_str(&format!("{header:>8} "));
            value_row.push_str(&format!("{value:>8.4} "));
        }
        format!("{}\n{}\n", header_row.trim_end(), value_row.trim_end())
    }

    /// Per-query rows as CSV.
    pub fn to_csv(&self, tie_seed: u64, tolerance: f64) -> Result<String, csv::Error> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record([
            "query_id",
            "n_trajectories",
            "n_trajectories_correct",
            "parallel_pass_rate",
            "vote_answer",
            "vote_correct",
            "n_deliberations",
            "n_deliberations_correct",
            "heavy_pass_rate",
        ])?;
        for eval in &self.per_query {
            let trajectory_correct =
                eval.trajectory_verdicts.iter().filter(|&&v| v).count();
            let deliberation_correct =
                eval.deliberation_verdicts.iter().filter(|&&v| v).count();
            writer.write_record([
                eval.query_id.clone(),
                eval.trajectory_verdicts.len().to_string(),
                trajectory_correct.to_string(),
                format!("{:.6}", eval.parallel_pass_rate),
                eval.vote_answer.clone().unwrap_or_default(),
                eval.vote_correct(tie_seed, tolerance).to_string(),
                eval.deliberation_verdicts.len().to_string(),
                deliberation_correct.to_string(),
                format!("{:.6}", eval.heavy_pass_rate()),
            ])?;
        }
        let bytes = writer.into_inner().expect("csv writer into_inner");
        Ok(String::from_utf8(bytes).expect("csv output is utf8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_from_bools(
        query_id: &str,
        trajectory: &[bool],
        deliberation: &[bool],
    ) -> QueryEvaluation {
        // Correct answers are "1", wrong answers unique per slot.
        let to_answers = |verdicts: &[bool]| -> Vec<Option<String>> {
            verdicts
                .iter()
                .enumerate()
                .map(|(i, &v)| Some(if v { "1".to_string() } else { format!("wrong-{i}") }))
                .collect()
        };
        QueryEvaluation::from_answers(
            query_id,
            DomainTag::Math,
            Some("1".to_string()),
            to_answers(trajectory),
            to_answers(deliberation),
            0,
            0.0,
        )
    }

    #[test]
    fn verify_examples() {
        let v = verify("42", "42", DomainTag::Math, 0.0);
        assert!(v.correct);
        assert_eq!(v.rule_applied, VerdictRule::Exact);

        // Canonicalization oracle: both parse as the same decimal.
        assert_eq!(" 42.0".trim().parse::<f64>().unwrap(), "42".parse::<f64>().unwrap());
        let v = verify(" 42.0", "42", DomainTag::Math, 0.0);
        assert!(v.correct);
        assert_eq!(v.rule_applied, VerdictRule::Numeric);

        let v = verify("A", "B", DomainTag::MultipleChoice, 0.0);
        assert!(!v.correct);
        assert_eq!(v.rule_applied, VerdictRule::Letter);
    }

    #[test]
    fn verify_normalization() {
        assert!(verify("  42. ", "42", DomainTag::Math, 0.0).correct);
        assert!(verify("b", "B", DomainTag::MultipleChoice, 0.0).correct);
        assert!(verify("3/4", "0.75", DomainTag::Math, 0.0).correct);
        assert!(verify("-1/2", "-0.5", DomainTag::Math, 0.0).correct);
        assert!(!verify("0.333", "1/3", DomainTag::Math, 0.0).correct);
        assert!(verify("0.333", "1/3", DomainTag::Math, 0.001).correct);
        assert!(!verify("abc", "abd", DomainTag::General, 0.0).correct);
    }

    #[test]
    fn verify_is_symmetric_at_zero_tolerance() {
        let pairs = [("42", "42.0"), ("3/4", "0.75"), ("A", "a"), ("x", "y"), ("1.5", "3/2")];
        for (a, b) in pairs {
            for domain in [DomainTag::Math, DomainTag::General, DomainTag::MultipleChoice] {
                assert_eq!(
                    verify(a, b, domain, 0.0).correct,
                    verify(b, a, domain, 0.0).correct,
                    "asymmetry for ({a}, {b})"
                );
            }
        }
    }

    #[test]
    fn parse_number_forms() {
        assert_eq!(parse_number("42").unwrap(), BigRational::from_integer(42.into()));
        assert_eq!(parse_number("-0.5").unwrap(), BigRational::new((-1).into(), 2.into()));
        assert_eq!(parse_number("7/2").unwrap(), BigRational::new(7.into(), 2.into()));
        assert!(parse_number("1/0").is_none());
        assert!(parse_number("forty-two").is_none());
        assert!(parse_number("1e3").is_none());
        assert!(parse_number("").is_none());
    }

    #[test]
    fn mean_examples() {
        let evals = vec![eval_from_bools("q1", &[true, false, true, false], &[true])];
        assert_eq!(mean_at_k(&evals).unwrap(), 0.5);

        let evals = vec![eval_from_bools("q1", &[true, true], &[true])];
        assert_eq!(mean_at_k(&evals).unwrap(), 1.0);

        // Macro average over queries: (0.25 + 0.75) / 2.
        let evals = vec![
            eval_from_bools("q1", &[true, false, false, false], &[true]),
            eval_from_bools("q2", &[true, true, true, false], &[true]),
        ];
        assert_eq!(mean_at_k(&evals).unwrap(), 0.5);
    }

    #[test]
    fn pass_examples() {
        let evals = vec![eval_from_bools("q1", &[false, false, false, true], &[true])];
        assert_eq!(pass_at_k(&evals).unwrap(), 1.0);

        let evals = vec![
            eval_from_bools("q1", &[false, false], &[true]),
            eval_from_bools("q2", &[false, true], &[true]),
        ];
        assert_eq!(pass_at_k(&evals).unwrap(), 0.5);
    }

    #[test]
    fn pass_estimate_matches_bernoulli_oracle() {
        // 2000 queries, K=8, each verdict true with p=0.5:
        // closed form P@8 = 1 - 0.5^8 = 0.99609375, M@8 = 0.5.
        let mut rng = SplitMix64::new(2024);
        let evals: Vec<QueryEvaluation> = (0..2000)
            .map(|i| {
                let verdicts: Vec<bool> = (0..8).map(|_| rng.next_f64() < 0.5).collect();
                eval_from_bools(&format!("q{i}"), &verdicts, &[true])
            })
            .collect();
        let pass = pass_at_k(&evals).unwrap();
        let mean = mean_at_k(&evals).unwrap();
        assert!((pass - 0.99609375).abs() < 0.01, "P@8 {pass}");
        assert!((mean - 0.5).abs() < 0.02, "M@8 {mean}");
    }

    fn eval_from_answers(query_id: &str, answers: &[&str], reference: &str) -> QueryEvaluation {
        QueryEvaluation::from_answers(
            query_id,
            DomainTag::Math,
            Some(reference.to_string()),
            answers.iter().map(|a| Some(a.to_string())).collect(),
            vec![Some(reference.to_string())],
            7,
            0.0,
        )
    }

    #[test]
    fn vote_majority_wins() {
        let evals = vec![eval_from_answers("q1", &["7", "7", "7", "5"], "7")];
        assert_eq!(vote_at_k(&evals, 7, 0.0).unwrap(), 1.0);
        assert_eq!(evals[0].vote_answer.as_deref(), Some("7"));
    }

    #[test]
    fn vote_tie_follows_shuffled_first_occurrence() {
        // Brute force: the winner must be one of the two tied answers, and
        // must equal the one whose first occurrence in the seed-shuffled
        // order comes earliest, replaying the stated rule directly.
        let answers: Vec<Option<String>> =
            ["7", "7", "5", "5"].iter().map(|a| Some(a.to_string())).collect();
        for tie_seed in 0..32u64 {
            let winner = vote_winner(&answers, "q-tie", tie_seed).unwrap();
            assert!(winner == "7" || winner == "5");

            let mut order: Vec<usize> = (0..4).collect();
            let mut rng = SplitMix64::new(keyed_seed(tie_seed, "q-tie"));
            rng.shuffle(&mut order);
            let expected = order
                .iter()
                .map(|&i| answers[i].clone().unwrap())
                .next()
                .unwrap();
            assert_eq!(winner, expected, "seed {tie_seed}");
        }
        // Both outcomes occur over enough seeds.
        let outcomes: std::collections::BTreeSet<String> =
            (0..32u64).map(|s| vote_winner(&answers, "q-tie", s).unwrap()).collect();
        assert_eq!(outcomes.len(), 2);
    }

    #[test]
    fn vote_all_distinct_takes_first_in_shuffled_order() {
        let answers: Vec<Option<String>> =
            ["1", "2", "3", "4"].iter().map(|a| Some(a.to_string())).collect();
        let winner = vote_winner(&answers, "q1", 3).unwrap();
        let mut order: Vec<usize> = (0..4).collect();
        let mut rng = SplitMix64::new(keyed_seed(3, "q1"));
        rng.shuffle(&mut order);
        assert_eq!(winner, answers[order[0]].clone().unwrap());
    }

    #[test]
    fn vote_ignores_trajectory_order_without_ties() {
        // 3 vs 1: no tie, so any permutation of the trajectories elects the
        // same winner under every seed.
        let base = ["7", "7", "7", "5"];
        let permutations = [[0, 1, 2, 3], [3, 2, 1, 0], [1, 3, 0, 2], [2, 0, 3, 1]];
        for seed in 0..16u64 {
            for perm in permutations {
                let answers: Vec<Option<String>> =
                    perm.iter().map(|&i| Some(base[i].to_string())).collect();
                assert_eq!(vote_winner(&answers, "q", seed).as_deref(), Some("7"));
            }
        }
    }

    #[test]
    fn vote_is_order_invariant_across_queries() {
        let a = eval_from_answers("qa", &["7", "7", "5", "5"], "7");
        let b = eval_from_answers("qb", &["3", "3", "9", "9"], "9");
        let forward = vote_at_k(&[a.clone(), b.clone()], 11, 0.0).unwrap();
        let backward = vote_at_k(&[b, a], 11, 0.0).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn heavy_examples() {
        let evals = vec![eval_from_bools("q1", &[true], &[true, true, false, false])];
        assert_eq!(heavy_mean_at_k(&evals).unwrap(), 0.5);
        assert_eq!(heavy_pass_at_k(&evals).unwrap(), 1.0);

        let evals = vec![eval_from_bools("q1", &[true], &[false, false])];
        assert_eq!(heavy_mean_at_k(&evals).unwrap(), 0.0);
        assert_eq!(heavy_pass_at_k(&evals).unwrap(), 0.0);
    }

    #[test]
    fn majority_deliberator_makes_hm_equal_vote() {
        // A deliberator that answers with the majority trajectory answer
        // makes HM@4 equal V@K exactly, bit for bit.
        let tie_seed = 5u64;
        let fixtures: Vec<(&str, Vec<&str>, &str)> = vec![
            ("q1", vec!["7", "7", "5", "3"], "7"),
            ("q2", vec!["2", "4", "4", "4"], "2"),
            ("q3", vec!["9", "9", "1", "1"], "9"),
            ("q4", vec!["8", "6", "5", "4"], "8"),
        ];
        let evals: Vec<QueryEvaluation> = fixtures
            .iter()
            .map(|(query_id, answers, reference)| {
                let trajectory_answers: Vec<Option<String>> =
                    answers.iter().map(|a| Some(a.to_string())).collect();
                let majority = vote_winner(&trajectory_answers, query_id, tie_seed);
                QueryEvaluation::from_answers(
                    query_id,
                    DomainTag::Math,
                    Some(reference.to_string()),
                    trajectory_answers,
                    vec![majority; 4],
                    tie_seed,
                    0.0,
                )
            })
            .collect();
        let hm = heavy_mean_at_k(&evals).unwrap();
        let vote = vote_at_k(&evals, tie_seed, 0.0).unwrap();
        assert_eq!(hm.to_bits(), vote.to_bits());
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(mean_at_k(&[]), Err(MetricsError::EmptyInput)));
        assert!(matches!(pass_at_k(&[]), Err(MetricsError::EmptyInput)));
        assert!(matches!(heavy_mean_at_k(&[]), Err(MetricsError::EmptyInput)));
        let no_delib = QueryEvaluation::from_answers(
            "q1",
            DomainTag::Math,
            Some("1".into()),
            vec![Some("1".into())],
            vec![],
            0,
            0.0,
        );
        assert!(matches!(
            heavy_pass_at_k(&[no_delib]),
            Err(MetricsError::MissingVerdicts { .. })
        ));
    }

    #[test]
    fn unbiased_estimator_at_extremes() {
        let all = eval_from_bools("q1", &[true; 10], &[true]);
        assert_eq!(unbiased_pass_at_k(&[all], 1).unwrap(), 1.0);
        let none = eval_from_bools("q1", &[false; 10], &[true]);
        assert_eq!(unbiased_pass_at_k(&[none], 1).unwrap(), 0.0);
        let half = eval_from_bools("q1", &[true, false], &[true]);
        assert!((unbiased_pass_at_k(&[half], 1).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn buckets_assign_by_half_open_edges() {
        // K=16, 2 correct -> rate 0.125 -> bucket 0.125.
        let mut verdicts = vec![false; 16];
        verdicts[0] = true;
        verdicts[1] = true;
        let low = eval_from_bools("q-low", &verdicts, &[true, false]);
        assert_eq!(low.parallel_pass_rate, 0.125);

        // Exactly 0.25 belongs to the second bucket.
        let boundary = eval_from_bools("q-edge", &[true, false, false, false], &[true, true]);
        assert_eq!(boundary.parallel_pass_rate, 0.25);

        let top = eval_from_bools("q-top", &[true, true, true, true], &[false, false]);

        let buckets = bucket_analysis(&[low, boundary, top], 2).unwrap();
        assert_eq!(buckets.len(), 4);
        assert_eq!(buckets[0].label, 0.125);
        assert_eq!(buckets[0].query_ids, vec!["q-low"]);
        assert_eq!(buckets[1].label, 0.375);
        assert_eq!(buckets[1].query_ids, vec!["q-edge"]);
        assert_eq!(buckets[3].query_ids, vec!["q-top"]);

        // Histogram of heavy pass rates in the low bucket: one query at 0.5.
        assert_eq!(buckets[0].heavy_pass_distribution.len(), 1);
        assert_eq!(buckets[0].heavy_pass_distribution[0].rate, 0.5);
        assert_eq!(buckets[0].heavy_pass_distribution[0].count, 1);
        // And the top bucket query had zero correct deliberations.
        assert_eq!(buckets[3].heavy_pass_distribution[0].rate, 0.0);
    }

    #[test]
    fn every_query_lands_in_exactly_one_bucket() {
        let mut rng = SplitMix64::new(77);
        let evals: Vec<QueryEvaluation> = (0..100)
            .map(|i| {
                let trajectory: Vec<bool> = (0..16).map(|_| rng.next_f64() < 0.5).collect();
                let deliberation: Vec<bool> = (0..16).map(|_| rng.next_f64() < 0.5).collect();
                eval_from_bools(&format!("q{i}"), &trajectory, &deliberation)
            })
            .collect();
        let buckets = bucket_analysis(&evals, 16).unwrap();
        let total: usize = buckets.iter().map(|b| b.query_ids.len()).sum();
        assert_eq!(total, 100);
    }

    #[test]
    fn report_table_lists_expected_columns() {
        let evals = vec![eval_from_bools("q1", &[true, false], &[true, false, true, true])];
        let report = MetricsReport::compute(evals, 2, 4, 0, 0.0).unwrap();
        let table = report.render_table();
        for column in ["M@2", "P@2", "V@2", "HM@4", "HP@4"] {
            assert!(table.contains(column), "missing column {column}");
        }
        assert!(report.pass_at_k >= report.mean_at_k);
        assert!(report.pass_at_k >= report.vote_at_k);
        assert!(report.heavy_pass_at_k >= report.heavy_mean_at_k);
    }

    #[test]
    fn csv_has_one_row_per_query() {
        let evals = vec![
            eval_from_bools("q1", &[true, false], &[true]),
            eval_from_bools("q2", &[false, false], &[false]),
        ];
        let report = MetricsReport::compute(evals, 2, 1, 0, 0.0).unwrap();
        let csv = report.to_csv(0, 0.0).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("query_id,"));
        assert!(csv.contains("q1,2,1,"));
    }
}
