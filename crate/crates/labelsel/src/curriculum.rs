//! Injection orderings over a selection: entropy-ranked (easy first) or
//! seeded-random.
//!
//! Schedules consume orderings as nested prefixes, so an ordering is fixed
//! once per run and never re-ranked. Entropy ranking reads each selected
//! row's prediction by position, which assumes the prediction matrix lists
//! the pool in the same row order as the embedding matrix the selection was
//! made from.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::PredictionMatrix;
use crate::select::SelectionResult;

#[derive(Debug, Error)]
pub enum CurriculumError {
    #[error("probability vector sums to {sum}, outside 1 ± 1e-5")]
    NotNormalized { sum: f64 },
    #[error("negative entry {value} at position {index}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("selected index {0} has no prediction row")]
    MissingPrediction(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankingKind {
    EntropyCurriculum,
    Random,
}

/// A selection plus the order its members are injected in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderedSelection {
    pub base: SelectionResult,
    /// Permutation of `base.indices`.
    pub order: Vec<usize>,
    pub ranking: RankingKind,
    /// Entropy (nats) along `order` when ranking is entropy-based.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scores: Option<Vec<f64>>,
}

/// Shannon entropy in nats, with `0 ln 0 := 0`.
pub fn entropy(p: &[f64]) -> Result<f64, CurriculumError> {
    let mut sum = 0.0;
    for (index, &value) in p.iter().enumerate() {
        if value < 0.0 {
            return Err(CurriculumError::NegativeEntry { index, value });
        }
        sum += value;
    }
    if (sum - 1.0).abs() > 1e-5 {
        return Err(CurriculumError::NotNormalized { sum });
    }
    let mut h = 0.0;
    for &value in p {
        if value > 0.0 {
            h -= value * value.ln();
        }
    }
    Ok(h)
}

/// Orders the selection by ascending prediction entropy (easy first), ties by
/// ascending index.
pub fn curriculum_order(
    preds: &PredictionMatrix,
    sel: &SelectionResult,
) -> Result<OrderedSelection, CurriculumError> {
    let mut scored = Vec::with_capacity(sel.indices.len());
    for &index in &sel.indices {
        if index >= preds.n_samples() {
            return Err(CurriculumError::MissingPrediction(index));
        }
        scored.push((index, entropy(preds.row(index))?));
    }
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let order: Vec<usize> = scored.iter().map(|&(i, _)| i).collect();
    let scores: Vec<f64> = scored.iter().map(|&(_, s)| s).collect();
    Ok(OrderedSelection {
        base: sel.clone(),
        order,
        ranking: RankingKind::EntropyCurriculum,
        scores: Some(scores),
    })
}

/// Seed-deterministic uniform permutation of the selection.
pub fn random_order(sel: &SelectionResult, seed: u64) -> OrderedSelection {
    let mut order = sel.indices.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    OrderedSelection { base: sel.clone(), order, ranking: RankingKind::Random, scores: None }
}
