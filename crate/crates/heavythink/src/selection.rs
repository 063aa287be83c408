//! Trajectory selection strategies for permutation studies: pick K
//! trajectories out of a larger pool (typically 256) under one of four
//! rules. Every strategy is deterministic: Random is seeded, and all ties
//! break by ascending trajectory id.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SplitMix64;
use crate::trajectory::{Trajectory, TrajectorySet};

/// Default pool size for permutation studies.
pub const DEFAULT_POOL_SIZE: u32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// Uniform seed-determined subset.
    Random,
    /// Greedy max-min selection under the shingle distance.
    MaxDiversity,
    /// The k trajectories with the greatest thinking+answer length.
    MaxLength,
    /// Trajectories whose extracted answers are most frequent.
    MaxAnswerNum,
}

impl std::str::FromStr for SelectionStrategy {
    type Err = String;

    fn from_str(value: &str) -> Result<Self, Self::Err> {
        match value.to_ascii_lowercase().replace('-', "_").as_str() {
            "random" => Ok(Self::Random),
            "max_diversity" => Ok(Self::MaxDiversity),
            "max_length" => Ok(Self::MaxLength),
            "max_answer_num" => Ok(Self::MaxAnswerNum),
            other => Err(format!("unknown selection strategy: {other}")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionSpec {
    pub strategy: SelectionStrategy,
    pub k: usize,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("pool of {pool} trajectories is smaller than k={k}")]
    PoolTooSmall { pool: usize, k: usize },
    #[error("k must be at least 1")]
    InvalidK,
}

/// Select `spec.k` trajectories from the pool under the given strategy.
pub fn select(pool: &TrajectorySet, spec: &SelectionSpec) -> Result<TrajectorySet, SelectionError> {
    if spec.k == 0 {
        return Err(SelectionError::InvalidK);
    }
    if pool.len() < spec.k {
        return Err(SelectionError::PoolTooSmall { pool: pool.len(), k: spec.k });
    }
    let selected: Vec<Trajectory> = match spec.strategy {
        SelectionStrategy::Random => select_random(&pool.trajectories, spec.k, spec.seed),
        SelectionStrategy::MaxLength => select_max_length(&pool.trajectories, spec.k),
        SelectionStrategy::MaxAnswerNum => select_max_answer_num(&pool.trajectories, spec.k),
        SelectionStrategy::MaxDiversity => select_max_diversity(&pool.trajectories, spec.k),
    };
    Ok(TrajectorySet {
        query_id: pool.query_id.clone(),
        trajectories: selected,
        fan_out: spec.k as u32,
        failures: Vec::new(),
    })
}

fn select_random(pool: &[Trajectory], k: usize, seed: u64) -> Vec<Trajectory> {
    let mut rng = SplitMix64::new(seed);
    rng.sample_indices(pool.len(), k)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect()
}

fn select_max_length(pool: &[Trajectory], k: usize) -> Vec<Trajectory> {
    let mut ranked: Vec<&Trajectory> = pool.iter().collect();
    ranked.sort_by(|a, b| {
        b.content_chars()
            .cmp(&a.content_chars())
            .then_with(|| a.trajectory_id.cmp(&b.trajectory_id))
    });
    ranked.into_iter().take(k).cloned().collect()
}

fn select_max_answer_num(pool: &[Trajectory], k: usize) -> Vec<Trajectory> {
    let frequency = |needle: &Option<String>| -> usize {
        pool.iter().filter(|t| &t.extracted_answer == needle).count()
    };
    let mut ranked: Vec<&Trajectory> = pool.iter().collect();
    ranked.sort_by(|a, b| {
        frequency(&b.extracted_answer)
            .cmp(&frequency(&a.extracted_answer))
            .then_with(|| a.trajectory_id.cmp(&b.trajectory_id))
    });
    ranked.into_iter().take(k).cloned().collect()
}

fn select_max_diversity(pool: &[Trajectory], k: usize) -> Vec<Trajectory> {
    // Greedy max-min: start from the lexicographically smallest id, then
    // repeatedly take the trajectory maximizing its minimum distance to the
    // already-chosen set, ties by ascending id.
    let mut remaining: Vec<&Trajectory> = pool.iter().collect();
    remaining.sort_by(|a, b| a.trajectory_id.cmp(&b.trajectory_id));
    let mut chosen: Vec<&Trajectory> = vec![remaining.remove(0)];
    while chosen.len() < k {
        let next = remaining
            .iter()
            .enumerate()
            .map(|(index, candidate)| {
                let min_distance = chosen
                    .iter()
                    .map(|picked| diversity_distance(candidate, picked))
                    .fold(f64::INFINITY, f64::min);
                (index, min_distance)
            })
            .max_by(|(ia, da), (ib, db)| {
                da.partial_cmp(db)
                    .expect("distances are finite")
                    .then_with(|| remaining[*ib].trajectory_id.cmp(&remaining[*ia].trajectory_id))
            })
            .map(|(index, _)| index)
            .expect("pool is large enough");
        chosen.push(remaining.remove(next));
    }
    chosen.into_iter().cloned().collect()
}

/// Lexical diversity distance: 1 − Jaccard similarity of the 4-character
/// shingle sets of the answer contents. Identical texts are at distance 0,
/// texts with disjoint shingle sets at distance 1. A non-empty text shorter
/// than the shingle width contributes itself as a single shingle; the empty
/// text has an empty shingle set, putting it at distance 0 from empty and 1
/// from anything else.
pub fn diversity_distance(a: &Trajectory, b: &Trajectory) -> f64 {
    jaccard_distance(&shingles(&a.answer_content), &shingles(&b.answer_content))
}

const SHINGLE_WIDTH: usize = 4;

fn shingles(text: &str) -> std::collections::BTreeSet<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut set = std::collections::BTreeSet::new();
    if chars.is_empty() {
        return set;
    }
    if chars.len() < SHINGLE_WIDTH {
        set.insert(text.to_string());
        return set;
    }
    for window in chars.windows(SHINGLE_WIDTH) {
        set.insert(window.iter().collect());
    }
    set
}

fn jaccard_distance(
    a: &std::collections::BTreeSet<String>,
    b: &std::collections::BTreeSet<String>,
) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let intersection = a.intersection(b).count();
    let union = a.len() + b.len() - intersection;
    1.0 - intersection as f64 / union as f64
}
