//! K-Means, K-Means++-initialized K-Means, and bisecting variants over an
//! embedding matrix.
//!
//! All distance work happens in `f64` with accumulations in ascending point
//! order, so a finished [`ClusterModel`] is a bitwise-deterministic function
//! of `(matrix, k, init, params, seed)`. Ties anywhere (nearest centroid,
//! farthest candidate, best restart) break toward the lowest index.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::EmbeddingMatrix;
use crate::seeding;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("k = {k} exceeds the number of samples ({n})")]
    KExceedsN { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("cluster {cluster} cannot be split and {need} more clusters are required")]
    UnsplittableCluster { cluster: usize, need: usize },
    #[error("model does not match the matrix: {0}")]
    DimensionMismatch(String),
}

/// How `++` picks each centroid after the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlusPlusVariant {
    /// Take the point with the largest minimum distance to the chosen
    /// centroids. Deterministic after the first draw.
    GreedyFarthest,
    /// Sample proportionally to squared minimum distance.
    D2Sampling,
}

/// Initialization scheme for a K-Means run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMethod {
    Random,
    PlusPlus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterParams {
    /// Lloyd iteration cap per restart.
    pub max_iters: usize,
    /// Relative WCSS improvement below which a run stops.
    pub rel_tol: f64,
    /// Independent runs; the lowest-WCSS model wins.
    pub restarts: usize,
    /// `++` flavour when the init method is `PlusPlus`.
    pub plusplus_variant: PlusPlusVariant,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            max_iters: 300,
            rel_tol: 1e-6,
            restarts: 10,
            plusplus_variant: PlusPlusVariant::GreedyFarthest,
        }
    }
}

/// A finished clustering: k centroids, a nearest-centroid assignment, and the
/// within-cluster sum of squared distances.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    pub dim: usize,
    /// Row-major `k x dim`.
    pub centroids: Vec<f64>,
    /// Cluster index per point, each in `[0, k)`, every cluster non-empty.
    pub assignment: Vec<usize>,
    pub wcss: f64,
}

impl ClusterModel {
    pub fn centroid(&self, j: usize) -> &[f64] {
        &self.centroids[j * self.dim..(j + 1) * self.dim]
    }

    /// Members of cluster `j` in ascending point order.
    pub fn members(&self, j: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == j)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Per-restart, per-iteration WCSS values from a [`kmeans_with_trace`] call.
#[derive(Debug, Clone)]
pub struct KMeansTrace {
    pub restart_wcss_per_iter: Vec<Vec<f64>>,
}

pub(crate) fn sq_dist(a: &[f32], c: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(c.iter()) {
        let d = f64::from(*x) - *y;
        s += d * d;
    }
    s
}

fn nearest_centroid(x: &[f32], centroids: &[f64], k: usize, dim: usize) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_d = sq_dist(x, &centroids[..dim]);
    for j in 1..k {
        let d = sq_dist(x, &centroids[j * dim..(j + 1) * dim]);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    (best, best_d)
}

fn validate_k(m: &EmbeddingMatrix, k: usize) -> Result<(), ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if k > m.n_samples() {
        return Err(ClusterError::KExceedsN { k, n: m.n_samples() });
    }
    Ok(())
}

/// k distinct data points chosen uniformly without replacement.
pub fn init_random(m: &EmbeddingMatrix, k: usize, seed: u64) -> Result<Vec<usize>, ClusterError> {
    validate_k(m, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, m.n_samples(), k).into_vec())
}

/// `++` seeding: a uniform first centroid, then either the farthest point
/// from the chosen set (greedy) or a squared-distance-weighted draw.
pub fn init_plusplus(
    m: &EmbeddingMatrix,
    k: usize,
    seed: u64,
    variant: PlusPlusVariant,
) -> Result<Vec<usize>, ClusterError> {
    validate_k(m, k)?;
    let n = m.n_samples();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..n);

    let mut chosen = Vec::with_capacity(k);
    let mut is_chosen = vec![false; n];
    let mut min_d2 = vec![0.0f64; n];
    chosen.push(first);
    is_chosen[first] = true;
    let first_row = to_f64(m.row(first));
    for (i, d) in min_d2.iter_mut().enumerate() {
        *d = sq_dist(m.row(i), &first_row);
    }

    while chosen.len() < k {
        let next = match variant {
            PlusPlusVariant::GreedyFarthest => {
                let mut best: Option<usize> = None;
                let mut best_d = f64::NEG_INFINITY;
                for i in 0..n {
                    if is_chosen[i] {
                        continue;
                    }
                    if min_d2[i] > best_d {
                        best_d = min_d2[i];
                        best = Some(i);
                    }
                }
                best.expect("k <= n leaves an unchosen point")
            }
            PlusPlusVariant::D2Sampling => {
                let mut total = 0.0f64;
                for i in 0..n {
                    if !is_chosen[i] {
                        total += min_d2[i];
                    }
                }
                if total > 0.0 {
                    let u = rng.random::<f64>() * total;
                    let mut cum = 0.0;
                    let mut pick = None;
                    for i in 0..n {
                        if is_chosen[i] {
                            continue;
                        }
                        cum += min_d2[i];
                        if u < cum {
                            pick = Some(i);
                            break;
                        }
                    }
                    // Rounding can leave u at the very top of the CDF.
                    pick.unwrap_or_else(|| {
                        (0..n).rev().find(|&i| !is_chosen[i] && min_d2[i] > 0.0).unwrap()
                    })
                } else {
                    // All remaining points coincide with a centroid.
                    (0..n).find(|&i| !is_chosen[i]).unwrap()
                }
            }
        };
        chosen.push(next);
        is_chosen[next] = true;
        let next_row = to_f64(m.row(next));
        for (i, best) in min_d2.iter_mut().enumerate() {
            let d = sq_dist(m.row(i), &next_row);
            if d < *best {
                *best = d;
            }
        }
    }
    Ok(chosen)
}

fn to_f64(row: &[f32]) -> Vec<f64> {
    row.iter().map(|&v| f64::from(v)).collect()
}

/// Assigns every point to its nearest centroid and repairs empty clusters by
/// seizing the globally farthest point from a donor cluster with at least two
/// members (the seized point becomes the repaired cluster's centroid).
/// Returns the WCSS of the resulting assignment against the (possibly
/// repaired) centroids.
fn assign_and_repair(
    m: &EmbeddingMatrix,
    k: usize,
    centroids: &mut [f64],
    assignment: &mut [usize],
) -> (f64, bool) {
    let n = m.n_samples();
    let dim = m.dim();
    let mut repaired_any = false;
    // Re-running the assignment after a repair lets other points react to the
    // moved centroid; the round cap only matters for fully degenerate data
    // (more clusters than distinct points), where the last repair is pinned.
    for round in 0..=k {
        for (i, slot) in assignment.iter_mut().enumerate() {
            *slot = nearest_centroid(m.row(i), centroids, k, dim).0;
        }
        let mut counts = vec![0usize; k];
        for &a in assignment.iter() {
            counts[a] += 1;
        }
        let empties: Vec<usize> = (0..k).filter(|&j| counts[j] == 0).collect();
        if empties.is_empty() {
            break;
        }
        repaired_any = true;
        for j in empties {
            let mut best: Option<usize> = None;
            let mut best_d = f64::NEG_INFINITY;
            for i in 0..n {
                if counts[assignment[i]] < 2 {
                    continue;
                }
                let d = sq_dist(m.row(i), &centroids[assignment[i] * dim..(assignment[i] + 1) * dim]);
                if d > best_d {
                    best_d = d;
                    best = Some(i);
                }
            }
            let p = best.expect("k <= n guarantees a donor cluster");
            counts[assignment[p]] -= 1;
            assignment[p] = j;
            counts[j] = 1;
            for (t, &v) in m.row(p).iter().enumerate() {
                centroids[j * dim + t] = f64::from(v);
            }
        }
        if round == k {
            break;
        }
    }
    let mut wcss = 0.0;
    for i in 0..n {
        wcss += sq_dist(m.row(i), &centroids[assignment[i] * dim..(assignment[i] + 1) * dim]);
    }
    (wcss, repaired_any)
}

fn update_means(m: &EmbeddingMatrix, k: usize, assignment: &[usize], centroids: &mut [f64]) {
    let dim = m.dim();
    let mut counts = vec![0usize; k];
    centroids.fill(0.0);
    for (i, &a) in assignment.iter().enumerate() {
        counts[a] += 1;
        for (t, &v) in m.row(i).iter().enumerate() {
            centroids[a * dim + t] += f64::from(v);
        }
    }
    for j in 0..k {
        debug_assert!(counts[j] > 0, "update_means requires non-empty clusters");
        for t in 0..dim {
            centroids[j * dim + t] /= counts[j] as f64;
        }
    }
}

struct RunOutput {
    centroids: Vec<f64>,
    assignment: Vec<usize>,
    wcss: f64,
    wcss_per_iter: Vec<f64>,
}

/// One Lloyd run from the given initial points. The recorded WCSS sequence is
/// non-increasing: each entry follows a mean update, a fresh nearest-centroid
/// assignment, and any empty-cluster repairs, each of which cannot raise the
/// objective.
fn lloyd_run(m: &EmbeddingMatrix, k: usize, init_points: &[usize], params: &ClusterParams) -> RunOutput {
    let dim = m.dim();
    let n = m.n_samples();
    let mut centroids = vec![0.0f64; k * dim];
    for (j, &p) in init_points.iter().enumerate() {
        for (t, &v) in m.row(p).iter().enumerate() {
            centroids[j * dim + t] = f64::from(v);
        }
    }
    let mut assignment = vec![0usize; n];
    let mut trace = Vec::new();

    let (mut prev, _) = assign_and_repair(m, k, &mut centroids, &mut assignment);
    trace.push(prev);
    for _ in 0..params.max_iters {
        update_means(m, k, &assignment, &mut centroids);
        let (wcss, repaired) = assign_and_repair(m, k, &mut centroids, &mut assignment);
        debug_assert!(wcss <= prev * (1.0 + 1e-9) + f64::EPSILON, "WCSS rose within a Lloyd run");
        trace.push(wcss);
        let improved = prev - wcss;
        prev = wcss;
        if !repaired && improved <= params.rel_tol * prev.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    RunOutput { centroids, assignment, wcss: prev, wcss_per_iter: trace }
}

/// Lloyd K-Means with restarts, returning the lowest-WCSS model.
pub fn kmeans(
    m: &EmbeddingMatrix,
    k: usize,
    init: InitMethod,
    params: &ClusterParams,
    seed: u64,
) -> Result<ClusterModel, ClusterError> {
    kmeans_with_trace(m, k, init, params, seed).map(|(model, _)| model)
}

/// As [`kmeans`], also returning the per-restart WCSS iteration traces.
pub fn kmeans_with_trace(
    m: &EmbeddingMatrix,
    k: usize,
    init: InitMethod,
    params: &ClusterParams,
    seed: u64,
) -> Result<(ClusterModel, KMeansTrace), ClusterError> {
    validate_k(m, k)?;
    assert!(params.max_iters >= 1, "max_iters must be at least 1");
    assert!(params.restarts >= 1, "restarts must be at least 1");
    let mut best: Option<RunOutput> = None;
    let mut traces = Vec::with_capacity(params.restarts);
    for r in 0..params.restarts {
        let rs = seeding::derive(seed, "kmeans-restart", r as u64);
        let init_points = match init {
            InitMethod::Random => init_random(m, k, rs)?,
            InitMethod::PlusPlus => init_plusplus(m, k, rs, params.plusplus_variant)?,
        };
        let run = lloyd_run(m, k, &init_points, params);
        traces.push(run.wcss_per_iter.clone());
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    let run = best.expect("restarts >= 1");
    Ok((
        ClusterModel {
            k,
            dim: m.dim(),
            centroids: run.centroids,
            assignment: run.assignment,
            wcss: run.wcss,
        },
        KMeansTrace { restart_wcss_per_iter: traces },
    ))
}

/// Bisecting K-Means: repeatedly 2-splits the cluster with the largest WCSS
/// contribution until k clusters exist. Each split runs `params.restarts`
/// independent 2-means trials. Cluster labels follow creation order: a split
/// keeps the parent's slot for sub-cluster 0 and appends sub-cluster 1. The
/// finished model is consolidated to a nearest-centroid assignment so it
/// satisfies the same contract as [`kmeans`] output.
pub fn bisecting_kmeans(
    m: &EmbeddingMatrix,
    k: usize,
    init: InitMethod,
    params: &ClusterParams,
    seed: u64,
) -> Result<ClusterModel, ClusterError> {
    validate_k(m, k)?;
    let n = m.n_samples();
    let dim = m.dim();
    let mut clusters: Vec<Vec<usize>> = vec![(0..n).collect()];
    let mut split_counter = 0u64;

    while clusters.len() < k {
        let mut target: Option<usize> = None;
        let mut target_wcss = f64::NEG_INFINITY;
        for (j, members) in clusters.iter().enumerate() {
            if members.len() < 2 {
                continue;
            }
            let contribution = cluster_contribution(m, members);
            if contribution > target_wcss {
                target_wcss = contribution;
                target = Some(j);
            }
        }
        let Some(target) = target else {
            return Err(ClusterError::UnsplittableCluster {
                cluster: clusters.len() - 1,
                need: k - clusters.len(),
            });
        };
        let members = clusters[target].clone();
        let sub = m.restrict(&members);
        let split_seed = seeding::derive(seed, "bisect-split", split_counter);
        split_counter += 1;
        let two = kmeans(&sub, 2, init, params, split_seed)?;
        let mut child_a = Vec::new();
        let mut child_b = Vec::new();
        for (local, &global) in members.iter().enumerate() {
            if two.assignment[local] == 0 {
                child_a.push(global);
            } else {
                child_b.push(global);
            }
        }
        clusters[target] = child_a;
        clusters.push(child_b);
    }

    let mut centroids = vec![0.0f64; k * dim];
    for (j, members) in clusters.iter().enumerate() {
        for &i in members {
            for (t, &v) in m.row(i).iter().enumerate() {
                centroids[j * dim + t] += f64::from(v);
            }
        }
        for t in 0..dim {
            centroids[j * dim + t] /= members.len() as f64;
        }
    }
    let mut assignment = vec![0usize; n];
    let (wcss, _) = assign_and_repair(m, k, &mut centroids, &mut assignment);
    Ok(ClusterModel { k, dim, centroids, assignment, wcss })
}

fn cluster_contribution(m: &EmbeddingMatrix, members: &[usize]) -> f64 {
    let dim = m.dim();
    let mut mean = vec![0.0f64; dim];
    for &i in members {
        for (t, &v) in m.row(i).iter().enumerate() {
            mean[t] += f64::from(v);
        }
    }
    for v in mean.iter_mut() {
        *v /= members.len() as f64;
    }
    let mut s = 0.0;
    for &i in members {
        s += sq_dist(m.row(i), &mean);
    }
    s
}

/// Recomputes the within-cluster sum of squares of a model over a matrix.
pub fn wcss(m: &EmbeddingMatrix, model: &ClusterModel) -> Result<f64, ClusterError> {
    if model.dim != m.dim() {
        return Err(ClusterError::DimensionMismatch(format!(
            "matrix dim {} vs model dim {}",
            m.dim(),
            model.dim
        )));
    }
    if model.assignment.len() != m.n_samples() {
        return Err(ClusterError::DimensionMismatch(format!(
            "matrix has {} rows, assignment has {}",
            m.n_samples(),
            model.assignment.len()
        )));
    }
    if model.centroids.len() != model.k * model.dim {
        return Err(ClusterError::DimensionMismatch(format!(
            "centroid storage {} vs k x dim = {}",
            model.centroids.len(),
            model.k * model.dim
        )));
    }
    let mut s = 0.0;
    for (i, &a) in model.assignment.iter().enumerate() {
        if a >= model.k {
            return Err(ClusterError::DimensionMismatch(format!(
                "assignment {a} out of range for k = {}",
                model.k
            )));
        }
        s += sq_dist(m.row(i), model.centroid(a));
    }
    Ok(s)
}

/// Chance-corrected agreement between two partitions; 1.0 means identical.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "partitions must label the same points");
    let n = a.len();
    if n == 0 {
        return 1.0;
    }
    let mut joint: std::collections::BTreeMap<(usize, usize), u64> = std::collections::BTreeMap::new();
    let mut rows: std::collections::BTreeMap<usize, u64> = std::collections::BTreeMap::new();
    let mut cols: std::collections::BTreeMap<usize, u64> = std::collections::BTreeMap::new();
    for i in 0..n {
        *joint.entry((a[i], b[i])).or_default() += 1;
        *rows.entry(a[i]).or_default() += 1;
        *cols.entry(b[i]).or_default() += 1;
    }
    let comb2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_joint: f64 = joint.values().map(|&x| comb2(x)).sum();
    let sum_rows: f64 = rows.values().map(|&x| comb2(x)).sum();
    let sum_cols: f64 = cols.values().map(|&x| comb2(x)).sum();
    let total = comb2(n as u64);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denom = max_index - expected;
    if denom == 0.0 {
        // Both partitions put everything in one block (or are all singletons).
        if (sum_joint - max_index).abs() < 1e-12 {
            1.0
        } else {
            0.0
        }
    } else {
        (sum_joint - expected) / denom
    }
}
