//! Labelled-set selection: one nearest-to-centroid sample per cluster, with
//! balanced (per-class) and uniform-random baselines.
//!
//! The cluster route partitions the pool into `n` clusters and takes, from
//! each cluster, the member closest to that cluster's centroid, so the result
//! always holds exactly `n` distinct row positions. Balanced variants split
//! the budget across classes with the quota rule in [`balanced_quota`] and
//! run the same machinery per class.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{self, ClusterError, ClusterParams, InitMethod};
use crate::ingest::{EmbeddingMatrix, LabelAssignment};
use crate::seeding;

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("n = {n} exceeds the population ({population})")]
    NExceedsPopulation { n: usize, population: usize },
    #[error("n = {n} is smaller than the class count ({classes})")]
    NLessThanClassCount { n: usize, classes: usize },
    #[error("class {class} has {available} members, fewer than its quota {quota}")]
    ClassTooSmall { class: usize, quota: usize, available: usize },
    #[error("sample id {0} has no label")]
    MissingLabel(u64),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMethod {
    ClusterSelect,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    Imbalanced,
    Balanced,
}

/// Which clustering algorithm backs a cluster selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClustererKind {
    #[serde(rename = "kmeans")]
    KMeans,
    #[serde(rename = "kmeans++")]
    KMeansPlusPlus,
    #[serde(rename = "bisecting")]
    Bisecting,
    #[serde(rename = "bisecting++")]
    BisectingPlusPlus,
}

impl ClustererKind {
    pub(crate) fn run(
        self,
        m: &EmbeddingMatrix,
        k: usize,
        params: &ClusterParams,
        seed: u64,
    ) -> Result<cluster::ClusterModel, ClusterError> {
        match self {
            ClustererKind::KMeans => cluster::kmeans(m, k, InitMethod::Random, params, seed),
            ClustererKind::KMeansPlusPlus => cluster::kmeans(m, k, InitMethod::PlusPlus, params, seed),
            ClustererKind::Bisecting => {
                cluster::bisecting_kmeans(m, k, InitMethod::Random, params, seed)
            }
            ClustererKind::BisectingPlusPlus => {
                cluster::bisecting_kmeans(m, k, InitMethod::PlusPlus, params, seed)
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClustererKind::KMeans => "kmeans",
            ClustererKind::KMeansPlusPlus => "kmeans++",
            ClustererKind::Bisecting => "bisecting",
            ClustererKind::BisectingPlusPlus => "bisecting++",
        }
    }
}

/// A chosen labelled set: `n` distinct row positions into the source matrix,
/// listed in ascending order, plus the metadata needed to reproduce the pick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: SelectionMethod,
    pub mode: SelectionMode,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub clusterer: Option<ClustererKind>,
    pub indices: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_class_counts: Option<BTreeMap<usize, usize>>,
}

/// Per-class budgets: `floor(n/c)` each, with the first `n mod c` classes (in
/// ascending class order) receiving one extra.
pub fn balanced_quota(n: usize, classes: usize) -> Vec<usize> {
    let base = n / classes;
    let extra = n % classes;
    (0..classes).map(|k| base + usize::from(k < extra)).collect()
}

/// Clusters the pool into `n` clusters and picks each cluster's member
/// nearest to its centroid (ties toward the lowest row).
pub fn select_by_clustering(
    m: &EmbeddingMatrix,
    n: usize,
    clusterer: ClustererKind,
    params: &ClusterParams,
    seed: u64,
) -> Result<SelectionResult, SelectError> {
    if n > m.n_samples() {
        return Err(SelectError::NExceedsPopulation { n, population: m.n_samples() });
    }
    let model = clusterer.run(m, n, params, seed)?;
    let indices = nearest_members(m, &model);
    Ok(SelectionResult {
        method: SelectionMethod::ClusterSelect,
        mode: SelectionMode::Imbalanced,
        seed,
        clusterer: Some(clusterer),
        indices,
        per_class_counts: None,
    })
}

fn nearest_members(m: &EmbeddingMatrix, model: &cluster::ClusterModel) -> Vec<usize> {
    let mut best: Vec<Option<(usize, f64)>> = vec![None; model.k];
    for (i, &a) in model.assignment.iter().enumerate() {
        let d = dist2(m.row(i), model.centroid(a));
        match best[a] {
            Some((_, bd)) if bd <= d => {}
            _ => best[a] = Some((i, d)),
        }
    }
    let mut indices: Vec<usize> =
        best.into_iter().map(|b| b.expect("finished models have no empty cluster").0).collect();
    indices.sort_unstable();
    indices
}

fn dist2(a: &[f32], c: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(c.iter()) {
        let d = f64::from(*x) - *y;
        s += d * d;
    }
    s
}

/// Per-class cluster selection with the [`balanced_quota`] rule. Every row of
/// `m` must carry a label.
pub fn select_balanced(
    m: &EmbeddingMatrix,
    labels: &LabelAssignment,
    n: usize,
    clusterer: ClustererKind,
    params: &ClusterParams,
    seed: u64,
) -> Result<SelectionResult, SelectError> {
    let classes = labels.classes();
    if n < classes {
        return Err(SelectError::NLessThanClassCount { n, classes });
    }
    if n > m.n_samples() {
        return Err(SelectError::NExceedsPopulation { n, population: m.n_samples() });
    }
    let mut rows_by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &id) in m.ids().iter().enumerate() {
        let class = labels.class_of(id).ok_or(SelectError::MissingLabel(id))?;
        rows_by_class[class].push(i);
    }
    let quota = balanced_quota(n, classes);
    let mut indices = Vec::with_capacity(n);
    let mut per_class = BTreeMap::new();
    for (class, rows) in rows_by_class.iter().enumerate() {
        let q = quota[class];
        if q == 0 {
            continue;
        }
        if rows.len() < q {
            return Err(SelectError::ClassTooSmall { class, quota: q, available: rows.len() });
        }
        let sub = m.restrict(rows);
        let class_seed = seeding::derive(seed, "balanced-class", class as u64);
        let sub_sel = select_by_clustering(&sub, q, clusterer, params, class_seed)?;
        indices.extend(sub_sel.indices.iter().map(|&local| rows[local]));
        per_class.insert(class, q);
    }
    indices.sort_unstable();
    Ok(SelectionResult {
        method: SelectionMethod::ClusterSelect,
        mode: SelectionMode::Balanced,
        seed,
        clusterer: Some(clusterer),
        indices,
        per_class_counts: Some(per_class),
    })
}

/// Uniform sample of `n` distinct positions from `0..population`.
pub fn select_random(population: usize, n: usize, seed: u64) -> Result<SelectionResult, SelectError> {
    if n > population {
        return Err(SelectError::NExceedsPopulation { n, population });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = rand::seq::index::sample(&mut rng, population, n).into_vec();
    indices.sort_unstable();
    Ok(SelectionResult {
        method: SelectionMethod::Random,
        mode: SelectionMode::Imbalanced,
        seed,
        clusterer: None,
        indices,
        per_class_counts: None,
    })
}

/// Per-class uniform sampling with the same quota rule as [`select_balanced`].
///
/// The label map alone defines the population here, so sample ids double as
/// the returned positions; in the bundled pipeline ids are the row positions
/// `0..N-1`.
pub fn select_random_balanced(
    labels: &LabelAssignment,
    n: usize,
    seed: u64,
) -> Result<SelectionResult, SelectError> {
    let classes = labels.classes();
    let by_class = labels.ids_by_class();
    let quota = balanced_quota(n, classes);
    let mut indices = Vec::with_capacity(n);
    let mut per_class = BTreeMap::new();
    for (class, members) in by_class.iter().enumerate() {
        let q = quota[class];
        if members.len() < q {
            return Err(SelectError::ClassTooSmall { class, quota: q, available: members.len() });
        }
        if q == 0 {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive(seed, "balanced-class", class as u64));
        let picks = rand::seq::index::sample(&mut rng, members.len(), q);
        indices.extend(picks.iter().map(|p| members[p] as usize));
        per_class.insert(class, q);
    }
    indices.sort_unstable();
    Ok(SelectionResult {
        method: SelectionMethod::Random,
        mode: SelectionMode::Balanced,
        seed,
        clusterer: None,
        indices,
        per_class_counts: Some(per_class),
    })
}
