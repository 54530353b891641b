//! Desk-scale semi-supervised learner and synthetic data generator.
//!
//! The learner is a multinomial logistic classifier trained by plain SGD on
//! `mean supervised cross-entropy + alpha * mean unsupervised term`, where
//! the unsupervised term is one of three consistency/pseudo-label shapes
//! (fixmatch, pi-model, mean-teacher) computed on gaussian-noised views of
//! the raw embedding. Augmentation at this scale is additive isotropic noise;
//! weak and strong augmentation differ only in their sigma. Every run is a
//! pure function of its inputs: all randomness flows from
//! [`crate::seeding::derive`] streams, so identical configs reproduce
//! identical reports bit for bit.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{self, ClusterError, ClusterParams, InitMethod};
use crate::curriculum::OrderedSelection;
use crate::ingest::{EmbeddingMatrix, IngestError, LabelAssignment, PredictionMatrix};
use crate::policy::{self, PolicyError, SupervisionSchedule};
use crate::seeding;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupervised mode needs a non-empty unlabelled batch")]
    EmptyUnlabelledBatch,
    #[error("schedule has {schedule_len} epochs but the config asks for {epochs}")]
    ScheduleMismatch { schedule_len: usize, epochs: usize },
    #[error("ordered selection index {0} is outside the training pool")]
    SelectionOutOfRange(usize),
    #[error("sample id {0} has no label")]
    MissingLabel(u64),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Synthetic gaussian-mixture pool: `classes` isotropic blobs in `dim`
/// dimensions. The `seed` field fixes the class means, so train and test
/// pools generated with different draw seeds share the same geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub spread: f64,
    pub separation: f64,
    pub seed: u64,
}

impl BlobSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.classes < 2 {
            return Err(SimError::InvalidConfig("blob spec needs at least 2 classes".into()));
        }
        if self.dim < 1 || self.per_class < 1 {
            return Err(SimError::InvalidConfig("blob spec needs dim >= 1 and per_class >= 1".into()));
        }
        if !self.spread.is_finite() || self.spread <= 0.0 {
            return Err(SimError::InvalidConfig("spread must be positive and finite".into()));
        }
        if !self.separation.is_finite() || self.separation <= 0.0 {
            return Err(SimError::InvalidConfig("separation must be positive and finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnsupMode {
    FixMatch,
    PiModel,
    MeanTeacher,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Unsupervised loss weight.
    pub alpha: f64,
    /// Pseudo-label confidence threshold.
    pub tau: f64,
    pub sigma_weak: f64,
    pub sigma_strong: f64,
    pub unsup_mode: UnsupMode,
    pub ema_momentum: f64,
    pub batch_size: usize,
    /// Unlabelled batch size; defaults to `batch_size` when absent.
    pub unlabelled_batch_size: Option<usize>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            learning_rate: 0.1,
            alpha: 1.0,
            tau: 0.95,
            sigma_weak: 0.1,
            sigma_strong: 0.5,
            unsup_mode: UnsupMode::FixMatch,
            ema_momentum: 0.999,
            batch_size: 64,
            unlabelled_batch_size: None,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !self.tau.is_finite() || self.tau <= 0.0 || self.tau > 1.0 {
            return Err(SimError::InvalidConfig(format!("tau must be in (0, 1], got {}", self.tau)));
        }
        if self.sigma_weak < 0.0 || self.sigma_strong < 0.0 || self.sigma_weak > self.sigma_strong {
            return Err(SimError::InvalidConfig(format!(
                "need 0 <= sigma_weak <= sigma_strong, got {} and {}",
                self.sigma_weak, self.sigma_strong
            )));
        }
        if !(self.ema_momentum > 0.0 && self.ema_momentum < 1.0) {
            return Err(SimError::InvalidConfig(format!(
                "ema_momentum must be in (0, 1), got {}",
                self.ema_momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(SimError::InvalidConfig("batch_size must be positive".into()));
        }
        if self.unlabelled_batch_size == Some(0) {
            return Err(SimError::InvalidConfig("unlabelled_batch_size must be positive".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(SimError::InvalidConfig("learning_rate must be positive".into()));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(SimError::InvalidConfig("alpha must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn effective_unlabelled_batch(&self) -> usize {
        self.unlabelled_batch_size.unwrap_or(self.batch_size)
    }
}

/// Linear softmax classifier: `c x D` weights plus biases, and an EMA teacher
/// copy used by the mean-teacher mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub classes: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub ema_weights: Vec<f64>,
    pub ema_biases: Vec<f64>,
}

impl ModelParams {
    /// Small random weights, zero biases, teacher initialized to the student.
    pub fn init(classes: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights: Vec<f64> =
            (0..classes * dim).map(|_| 0.01 * rng.sample::<f64, _>(StandardNormal)).collect();
        let biases = vec![0.0; classes];
        Self {
            classes,
            dim,
            ema_weights: weights.clone(),
            ema_biases: biases.clone(),
            weights,
            biases,
        }
    }

    fn logits_with(&self, weights: &[f64], biases: &[f64], x: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.classes);
        for r in 0..self.classes {
            let mut s = biases[r];
            let row = &weights[r * self.dim..(r + 1) * self.dim];
            for (w, v) in row.iter().zip(x.iter()) {
                s += w * v;
            }
            z.push(s);
        }
        z
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.logits_with(&self.weights, &self.biases, x)
    }

    pub fn ema_logits(&self, x: &[f64]) -> Vec<f64> {
        self.logits_with(&self.ema_weights, &self.ema_biases, x)
    }

    /// Argmax class, ties toward the lowest index.
    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.logits(x))
    }

    pub fn sgd_step(&mut self, grad: &Gradients, learning_rate: f64) {
        for (w, g) in self.weights.iter_mut().zip(grad.weights.iter()) {
            *w -= learning_rate * g;
        }
        for (b, g) in self.biases.iter_mut().zip(grad.biases.iter()) {
            *b -= learning_rate * g;
        }
    }

    pub fn ema_update(&mut self, momentum: f64) {
        for (e, w) in self.ema_weights.iter_mut().zip(self.weights.iter()) {
            *e = momentum * *e + (1.0 - momentum) * w;
        }
        for (e, b) in self.ema_biases.iter_mut().zip(self.biases.iter()) {
            *e = momentum * *e + (1.0 - momentum) * b;
        }
    }
}

/// Gradient of the combined loss, same shapes as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Gradients {
    fn zeros(classes: usize, dim: usize) -> Self {
        Self { weights: vec![0.0; classes * dim], biases: vec![0.0; classes] }
    }

    fn add_outer(&mut self, dz: &[f64], x: &[f64], scale: f64, dim: usize) {
        for (r, &g) in dz.iter().enumerate() {
            let gs = g * scale;
            let row = &mut self.weights[r * dim..(r + 1) * dim];
            for (w, v) in row.iter_mut().zip(x.iter()) {
                *w += gs * v;
            }
            self.biases[r] += gs;
        }
    }
}

/// Pseudo-label mask counts from one batch.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnsupStats {
    pub passed: usize,
    pub total: usize,
}

/// Numerically stable softmax; the output sums to 1 up to rounding.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn widen(row: &[f32]) -> Vec<f64> {
    row.iter().map(|&v| f64::from(v)).collect()
}

/// Pulls the gradient of `||p - target||^2` back through the softmax:
/// `dL/dz = J(p) * 2 (p - target)` with `J(p) v = p .* (v - p . v)`.
fn softmax_sq_diff_backward(p: &[f64], g: &[f64]) -> Vec<f64> {
    let dot: f64 = p.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
    p.iter().zip(g.iter()).map(|(&pi, &gi)| pi * (gi - dot)).collect()
}

/// Synthetic gaussian blobs: class means are placed from `spec.seed` with
/// every pairwise distance at least `separation`, then points are drawn
/// around them with standard deviation `spread` using `draw_seed`. Calling
/// again with a different draw seed yields a matched held-out set.
pub fn gen_blobs(
    spec: &BlobSpec,
    draw_seed: u64,
) -> Result<(EmbeddingMatrix, LabelAssignment), SimError> {
    spec.validate()?;
    let means = class_means(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive(draw_seed, "blob-points", 0));
    let n = spec.classes * spec.per_class;
    let mut data = Vec::with_capacity(n * spec.dim);
    let mut labels = std::collections::BTreeMap::new();
    let mut id = 0u64;
    for class in 0..spec.classes {
        let mean = &means[class * spec.dim..(class + 1) * spec.dim];
        for _ in 0..spec.per_class {
            for &mu in mean {
                let z: f64 = rng.sample(StandardNormal);
                data.push((mu + spec.spread * z) as f32);
            }
            labels.insert(id, class);
            id += 1;
        }
    }
    let matrix = EmbeddingMatrix::new((0..n as u64).collect(), data, spec.dim)?;
    let labels = LabelAssignment::new(labels, spec.classes)?;
    Ok((matrix, labels))
}

fn class_means(spec: &BlobSpec) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive(spec.seed, "blob-means", 0));
    let base_scale = spec.separation / (2.0 * spec.dim as f64).sqrt();
    let mut means: Vec<f64> = Vec::with_capacity(spec.classes * spec.dim);
    for class in 0..spec.classes {
        let mut attempts = 0u32;
        loop {
            // Grow the proposal radius under rejection pressure so placement
            // always terminates, staying near the separation scale.
            let scale = base_scale * 1.05f64.powi((attempts / 20) as i32);
            let candidate: Vec<f64> =
                (0..spec.dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
            let ok = (0..class).all(|other| {
                let o = &means[other * spec.dim..(other + 1) * spec.dim];
                let d2: f64 =
                    o.iter().zip(candidate.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                d2.sqrt() >= spec.separation
            });
            if ok {
                means.extend_from_slice(&candidate);
                break;
            }
            attempts += 1;
        }
    }
    means
}

/// Stand-in for a pre-trained model's class posteriors: clusters the pool
/// with k-means and softmaxes the negated centroid distances at the given
/// temperature. A point equidistant from all centroids gets a uniform row.
pub fn proxy_predictions(
    m: &EmbeddingMatrix,
    k: usize,
    temperature: f64,
    seed: u64,
) -> Result<PredictionMatrix, SimError> {
    if k < 2 {
        return Err(SimError::InvalidConfig("proxy predictions need k >= 2".into()));
    }
    if !temperature.is_finite() || temperature <= 0.0 {
        return Err(SimError::InvalidConfig("temperature must be positive".into()));
    }
    let model = cluster::kmeans(m, k, InitMethod::Random, &ClusterParams::default(), seed)?;
    let mut probs = Vec::with_capacity(m.n_samples() * k);
    for i in 0..m.n_samples() {
        let logits: Vec<f64> = (0..k)
            .map(|j| {
                let d2: f64 = m
                    .row(i)
                    .iter()
                    .zip(model.centroid(j).iter())
                    .map(|(&x, &c)| (f64::from(x) - c) * (f64::from(x) - c))
                    .sum();
                -d2.sqrt() / temperature
            })
            .collect();
        probs.extend(softmax(&logits));
    }
    Ok(PredictionMatrix::new(m.ids().to_vec(), probs, k)?)
}

/// Combined loss and its exact analytic gradient for one batch pair.
///
/// The supervised term is mean cross-entropy over the labelled batch (zero
/// when empty). The unsupervised term per point, weighted by `alpha`, is:
///
/// * fixmatch: cross-entropy of the strong-noise view against the weak
///   view's argmax, counted only when the weak confidence reaches `tau`;
/// * pimodel: squared distance between softmax outputs of two weak views,
///   with gradient flowing through both;
/// * meanteacher: squared distance between the student on view 1 and the
///   EMA teacher on view 2, teacher held constant;
/// * none: zero.
///
/// Pseudo-label argmaxes and threshold masks are gradient-stopped. With
/// `alpha == 0` the unsupervised pass is skipped outright, so unlabelled
/// batch contents cannot perturb the result. Noise draws depend only on
/// `seed` and the batch layout, which keeps the loss a deterministic
/// function of the parameters — that is what makes finite-difference
/// checks of the gradient meaningful.
pub fn loss_and_grad(
    params: &ModelParams,
    m: &EmbeddingMatrix,
    labelled: &[(usize, usize)],
    unlabelled: &[usize],
    cfg: &SimConfig,
    seed: u64,
) -> Result<(f64, Gradients, UnsupStats), SimError> {
    let dim = params.dim;
    let mut grad = Gradients::zeros(params.classes, dim);
    let mut loss = 0.0;
    let mut stats = UnsupStats::default();

    if cfg.unsup_mode != UnsupMode::None && unlabelled.is_empty() {
        return Err(SimError::EmptyUnlabelledBatch);
    }

    if !labelled.is_empty() {
        let scale = 1.0 / labelled.len() as f64;
        for &(idx, class) in labelled {
            let x = widen(m.row(idx));
            let p = softmax(&params.logits(&x));
            loss += -p[class].max(f64::MIN_POSITIVE).ln() * scale;
            let mut dz = p;
            dz[class] -= 1.0;
            grad.add_outer(&dz, &x, scale, dim);
        }
    }

    if cfg.alpha != 0.0 && cfg.unsup_mode != UnsupMode::None {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = cfg.alpha / unlabelled.len() as f64;
        for &idx in unlabelled {
            let x = widen(m.row(idx));
            // Both views are drawn unconditionally so the noise stream layout
            // is fixed per batch.
            let (sigma1, sigma2) = match cfg.unsup_mode {
                UnsupMode::FixMatch => (cfg.sigma_weak, cfg.sigma_strong),
                _ => (cfg.sigma_weak, cfg.sigma_weak),
            };
            let view1: Vec<f64> =
                x.iter().map(|&v| v + sigma1 * rng.sample::<f64, _>(StandardNormal)).collect();
            let view2: Vec<f64> =
                x.iter().map(|&v| v + sigma2 * rng.sample::<f64, _>(StandardNormal)).collect();
            stats.total += 1;
            match cfg.unsup_mode {
                UnsupMode::FixMatch => {
                    let p_weak = softmax(&params.logits(&view1));
                    let target = argmax(&p_weak);
                    if p_weak[target] >= cfg.tau {
                        stats.passed += 1;
                        let p_strong = softmax(&params.logits(&view2));
                        loss += -p_strong[target].max(f64::MIN_POSITIVE).ln() * scale;
                        let mut dz = p_strong;
                        dz[target] -= 1.0;
                        grad.add_outer(&dz, &view2, scale, dim);
                    }
                }
                UnsupMode::PiModel => {
                    let p1 = softmax(&params.logits(&view1));
                    let p2 = softmax(&params.logits(&view2));
                    if p1[argmax(&p1)] >= cfg.tau {
                        stats.passed += 1;
                    }
                    let sq: f64 = p1.iter().zip(p2.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                    loss += sq * scale;
                    let g: Vec<f64> = p1.iter().zip(p2.iter()).map(|(a, b)| 2.0 * (a - b)).collect();
                    let dz1 = softmax_sq_diff_backward(&p1, &g);
                    let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                    let dz2 = softmax_sq_diff_backward(&p2, &neg);
                    grad.add_outer(&dz1, &view1, scale, dim);
                    grad.add_outer(&dz2, &view2, scale, dim);
                }
                UnsupMode::MeanTeacher => {
                    let p1 = softmax(&params.logits(&view1));
                    let pt = softmax(&params.ema_logits(&view2));
                    if p1[argmax(&p1)] >= cfg.tau {
                        stats.passed += 1;
                    }
                    let sq: f64 = p1.iter().zip(pt.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                    loss += sq * scale;
                    let g: Vec<f64> = p1.iter().zip(pt.iter()).map(|(a, b)| 2.0 * (a - b)).collect();
                    let dz1 = softmax_sq_diff_backward(&p1, &g);
                    grad.add_outer(&dz1, &view1, scale, dim);
                }
                UnsupMode::None => unreachable!(),
            }
        }
    }

    Ok((loss, grad, stats))
}

/// One simulation run: accuracy, per-epoch curves, and the config echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub test_accuracy: f64,
    pub train_loss_curve: Vec<f64>,
    pub pseudo_label_rate_curve: Vec<f64>,
    pub active_count_curve: Vec<usize>,
    pub config: SimConfig,
    pub seed: u64,
}

/// Fraction of rows whose argmax logit matches the label.
pub fn evaluate_accuracy(
    m: &EmbeddingMatrix,
    labels: &LabelAssignment,
    params: &ModelParams,
) -> Result<f64, SimError> {
    let mut correct = 0usize;
    for i in 0..m.n_samples() {
        let truth = labels.class_of(m.ids()[i]).ok_or(SimError::MissingLabel(m.ids()[i]))?;
        if params.predict(&widen(m.row(i))) == truth {
            correct += 1;
        }
    }
    Ok(correct as f64 / m.n_samples() as f64)
}

/// Trains for `cfg.epochs` epochs. Each epoch activates the schedule's prefix
/// of the ordering, walks the shuffled pool in unlabelled batches, and takes
/// one SGD step per batch; labelled batches are drawn from the active prefix
/// (with replacement when the prefix is smaller than the batch size). The
/// EMA teacher advances once per step in mean-teacher mode.
pub fn train(
    data: (&EmbeddingMatrix, &LabelAssignment),
    test: (&EmbeddingMatrix, &LabelAssignment),
    ord: &OrderedSelection,
    sched: &SupervisionSchedule,
    cfg: &SimConfig,
) -> Result<TrialReport, SimError> {
    let (m, labels) = data;
    cfg.validate()?;
    if sched.counts.len() != cfg.epochs {
        return Err(SimError::ScheduleMismatch {
            schedule_len: sched.counts.len(),
            epochs: cfg.epochs,
        });
    }
    for &idx in &ord.order {
        if idx >= m.n_samples() {
            return Err(SimError::SelectionOutOfRange(idx));
        }
    }
    let n = m.n_samples();
    let ub = cfg.effective_unlabelled_batch();
    let mut params = ModelParams::init(labels.classes(), m.dim(), seeding::derive(cfg.seed, "init", 0));

    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let mut rate_curve = Vec::with_capacity(cfg.epochs);
    let mut active_curve = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let epoch_seed = seeding::derive(cfg.seed, "epoch", epoch as u64);
        let prefix = policy::active_prefix(ord, sched, epoch)?;
        let labelled_pool: Vec<(usize, usize)> = prefix
            .iter()
            .map(|&idx| {
                let id = m.ids()[idx];
                labels.class_of(id).map(|c| (idx, c)).ok_or(SimError::MissingLabel(id))
            })
            .collect::<Result<_, _>>()?;

        let mut pool: Vec<usize> = (0..n).collect();
        {
            use rand::seq::SliceRandom;
            let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive(epoch_seed, "pool", 0));
            pool.shuffle(&mut rng);
        }

        let steps = n.div_ceil(ub);
        let mut epoch_loss = 0.0;
        let mut passed = 0usize;
        let mut total = 0usize;
        for step in 0..steps {
            let unlab = &pool[step * ub..((step + 1) * ub).min(n)];
            let lab_batch: Vec<(usize, usize)> = if labelled_pool.is_empty() {
                Vec::new()
            } else {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seeding::derive(epoch_seed, "labelled", step as u64));
                if labelled_pool.len() >= cfg.batch_size {
                    rand::seq::index::sample(&mut rng, labelled_pool.len(), cfg.batch_size)
                        .iter()
                        .map(|i| labelled_pool[i])
                        .collect()
                } else {
                    (0..cfg.batch_size)
                        .map(|_| labelled_pool[rng.random_range(0..labelled_pool.len())])
                        .collect()
                }
            };
            let noise_seed = seeding::derive(epoch_seed, "noise", step as u64);
            let (loss, grad, stats) = loss_and_grad(&params, m, &lab_batch, unlab, cfg, noise_seed)?;
            params.sgd_step(&grad, cfg.learning_rate);
            if cfg.unsup_mode == UnsupMode::MeanTeacher {
                params.ema_update(cfg.ema_momentum);
            }
            epoch_loss += loss;
            passed += stats.passed;
            total += stats.total;
        }
        loss_curve.push(epoch_loss / steps as f64);
        rate_curve.push(if total == 0 { 0.0 } else { passed as f64 / total as f64 });
        active_curve.push(prefix.len());
    }

    let (tm, tl) = test;
    let test_accuracy = evaluate_accuracy(tm, tl, &params)?;
    Ok(TrialReport {
        test_accuracy,
        train_loss_curve: loss_curve,
        pseudo_label_rate_curve: rate_curve,
        active_count_curve: active_curve,
        config: *cfg,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curriculum::random_order;
    use crate::policy::{build_schedule, PolicyKind, PolicySpec};
    use crate::select::select_random;

    fn blob_spec(classes: usize, per_class: usize, ratio: f64) -> BlobSpec {
        BlobSpec { classes, dim: 2, per_class, spread: 1.0, separation: ratio, seed: 99 }
    }

    #[test]
    fn gen_blobs_counts() {
        let (m, labels) = gen_blobs(&blob_spec(2, 10, 5.0), 1).unwrap();
        assert_eq!(m.n_samples(), 20);
        assert_eq!(labels.classes(), 2);
        let per: Vec<usize> = labels.ids_by_class().iter().map(Vec::len).collect();
        assert_eq!(per, vec![10, 10]);
    }

    #[test]
    fn gen_blobs_tiny_spread_collapses_to_means() {
        let spec = BlobSpec { spread: 1e-9, ..blob_spec(3, 4, 5.0) };
        let (m, labels) = gen_blobs(&spec, 7).unwrap();
        for class in 0..3 {
            let rows: Vec<usize> = (0..m.n_samples())
                .filter(|&i| labels.class_of(m.ids()[i]) == Some(class))
                .collect();
            let first = m.row(rows[0]);
            for &r in &rows[1..] {
                for (a, b) in m.row(r).iter().zip(first.iter()) {
                    assert!((a - b).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn gen_blobs_means_at_least_separation_apart() {
        let spec = blob_spec(6, 1, 3.0);
        let tight = BlobSpec { spread: 1e-9, ..spec };
        let (m, _) = gen_blobs(&tight, 0).unwrap();
        for i in 0..6 {
            for j in (i + 1)..6 {
                let d2: f64 = m
                    .row(i)
                    .iter()
                    .zip(m.row(j).iter())
                    .map(|(&a, &b)| (f64::from(a) - f64::from(b)).powi(2))
                    .sum();
                assert!(d2.sqrt() >= 3.0 - 1e-4, "means too close: {}", d2.sqrt());
            }
        }
    }

    #[test]
    fn gen_blobs_same_geometry_across_draw_seeds() {
        let spec = BlobSpec { spread: 1e-9, ..blob_spec(3, 1, 4.0) };
        let (a, _) = gen_blobs(&spec, 1).unwrap();
        let (b, _) = gen_blobs(&spec, 2).unwrap();
        for i in 0..3 {
            for (x, y) in a.row(i).iter().zip(b.row(i).iter()) {
                assert!((x - y).abs() < 1e-5, "means should be shared across draw seeds");
            }
        }
    }

    #[test]
    fn proxy_rows_sum_to_one() {
        let (m, _) = gen_blobs(&blob_spec(3, 20, 6.0), 5).unwrap();
        let p = proxy_predictions(&m, 3, 1.0, 11).unwrap();
        for i in 0..p.n_samples() {
            let s: f64 = p.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn proxy_low_temperature_is_one_hot() {
        let (m, _) = gen_blobs(&blob_spec(2, 25, 10.0), 3).unwrap();
        let p = proxy_predictions(&m, 2, 1e-4, 17).unwrap();
        let row = p.row(0);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(max > 1.0 - 1e-9);
    }

    #[test]
    fn proxy_rejects_bad_k_and_temperature() {
        let (m, _) = gen_blobs(&blob_spec(2, 5, 5.0), 0).unwrap();
        assert!(proxy_predictions(&m, 1, 1.0, 0).is_err());
        assert!(proxy_predictions(&m, 2, 0.0, 0).is_err());
    }

    #[test]
    fn softmax_equal_logits_is_uniform() {
        let p = softmax(&[0.5, 0.5, 0.5, 0.5]);
        for v in p {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    fn fd_check(cfg: &SimConfig, m: &EmbeddingMatrix, labelled: &[(usize, usize)], unlab: &[usize], seed: u64) {
        let params = ModelParams::init(3, m.dim(), seed ^ 0xabcd);
        let (_, grad, _) = loss_and_grad(&params, m, labelled, unlab, cfg, seed).unwrap();
        let h = 1e-5;
        let check = |get: &dyn Fn(&ModelParams) -> f64, set: &dyn Fn(&mut ModelParams, f64), analytic: f64| {
            let mut plus = params.clone();
            set(&mut plus, get(&params) + h);
            let mut minus = params.clone();
            set(&mut minus, get(&params) - h);
            let f_plus = loss_and_grad(&plus, m, labelled, unlab, cfg, seed).unwrap().0;
            let f_minus = loss_and_grad(&minus, m, labelled, unlab, cfg, seed).unwrap().0;
            let fd = (f_plus - f_minus) / (2.0 * h);
            let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-6);
            assert!(rel < 1e-4, "gradient mismatch: analytic {analytic} vs fd {fd} (rel {rel})");
        };
        for t in 0..params.weights.len() {
            check(&|p| p.weights[t], &move |p, v| p.weights[t] = v, grad.weights[t]);
        }
        for t in 0..params.biases.len() {
            check(&|p| p.biases[t], &move |p, v| p.biases[t] = v, grad.biases[t]);
        }
    }

    #[test]
    fn gradient_matches_finite_differences_all_modes() {
        let (m, labels) = gen_blobs(
            &BlobSpec { classes: 3, dim: 3, per_class: 4, spread: 1.0, separation: 2.0, seed: 5 },
            21,
        )
        .unwrap();
        let labelled: Vec<(usize, usize)> =
            (0..4).map(|i| (i, labels.class_of(i as u64).unwrap())).collect();
        let unlab: Vec<usize> = (4..10).collect();
        for mode in [UnsupMode::FixMatch, UnsupMode::PiModel, UnsupMode::MeanTeacher, UnsupMode::None] {
            let cfg = SimConfig {
                unsup_mode: mode,
                tau: 0.4,
                sigma_weak: 0.05,
                sigma_strong: 0.3,
                ..SimConfig::default()
            };
            fd_check(&cfg, &m, &labelled, &unlab, 77);
        }
    }

    #[test]
    fn alpha_zero_reduces_to_supervised_logistic() {
        let (m, labels) = gen_blobs(&blob_spec(3, 5, 4.0), 2).unwrap();
        let params = ModelParams::init(3, 2, 1);
        let labelled: Vec<(usize, usize)> =
            (0..6).map(|i| (i, labels.class_of(i as u64).unwrap())).collect();
        let cfg = SimConfig { alpha: 0.0, ..SimConfig::default() };
        let (loss_a, grad_a, _) = loss_and_grad(&params, &m, &labelled, &[9, 10], &cfg, 3).unwrap();
        // Pure supervised reference with mode none and no unlabelled batch.
        let cfg_none = SimConfig { alpha: 0.0, unsup_mode: UnsupMode::None, ..SimConfig::default() };
        let (loss_b, grad_b, _) = loss_and_grad(&params, &m, &labelled, &[], &cfg_none, 99).unwrap();
        assert_eq!(loss_a.to_bits(), loss_b.to_bits());
        assert_eq!(grad_a, grad_b);
    }

    #[test]
    fn fixmatch_tau_one_passes_nothing() {
        let (m, labels) = gen_blobs(&blob_spec(2, 6, 4.0), 4).unwrap();
        let params = ModelParams::init(2, 2, 8);
        let labelled = vec![(0usize, labels.class_of(0).unwrap())];
        let cfg = SimConfig { tau: 1.0, ..SimConfig::default() };
        let (_, _, stats) = loss_and_grad(&params, &m, &labelled, &[2, 3, 4], &cfg, 6).unwrap();
        assert_eq!(stats.passed, 0);
        assert_eq!(stats.total, 3);
    }

    #[test]
    fn empty_unlabelled_batch_is_an_error() {
        let (m, _) = gen_blobs(&blob_spec(2, 3, 4.0), 4).unwrap();
        let params = ModelParams::init(2, 2, 8);
        let cfg = SimConfig::default();
        assert!(matches!(
            loss_and_grad(&params, &m, &[], &[], &cfg, 0),
            Err(SimError::EmptyUnlabelledBatch)
        ));
    }

    fn full_ordering(n: usize, seed: u64) -> OrderedSelection {
        random_order(&select_random(n, n, seed).unwrap(), seed)
    }

    #[test]
    fn supervised_training_separates_blobs() {
        let spec = blob_spec(2, 30, 10.0);
        let (m, labels) = gen_blobs(&spec, 1).unwrap();
        let (tm, tl) = gen_blobs(&spec, 2).unwrap();
        let ord = full_ordering(m.n_samples(), 5);
        let cfg = SimConfig {
            epochs: 40,
            unsup_mode: UnsupMode::None,
            alpha: 0.0,
            learning_rate: 0.5,
            batch_size: 16,
            seed: 3,
            ..SimConfig::default()
        };
        let sched = build_schedule(&PolicySpec {
            kind: PolicyKind::Naive,
            n: m.n_samples(),
            n0: m.n_samples(),
            e: cfg.epochs,
            e0: 0,
            ef: 0,
            m: 1,
        })
        .unwrap();
        let report = train((&m, &labels), (&tm, &tl), &ord, &sched, &cfg).unwrap();
        // Evaluating on the train pool itself checks the supervised oracle:
        // a linear model must fit fully separated blobs exactly.
        let on_train = train((&m, &labels), (&m, &labels), &ord, &sched, &cfg).unwrap();
        assert_eq!(on_train.test_accuracy, 1.0, "train accuracy should hit 1.0 on separated blobs");
        assert!(report.test_accuracy > 0.95);
    }

    #[test]
    fn zero_epoch_trial_reports_initial_model() {
        let spec = blob_spec(2, 5, 5.0);
        let (m, labels) = gen_blobs(&spec, 1).unwrap();
        let ord = full_ordering(m.n_samples(), 0);
        let cfg = SimConfig { epochs: 0, ..SimConfig::default() };
        let sched = SupervisionSchedule { counts: vec![] };
        let report = train((&m, &labels), (&m, &labels), &ord, &sched, &cfg).unwrap();
        assert!(report.train_loss_curve.is_empty());
        assert!((0.0..=1.0).contains(&report.test_accuracy));
    }

    #[test]
    fn trials_are_deterministic_and_seed_sensitive() {
        let spec = blob_spec(3, 10, 4.0);
        let (m, labels) = gen_blobs(&spec, 1).unwrap();
        let (tm, tl) = gen_blobs(&spec, 2).unwrap();
        let ord = full_ordering(m.n_samples(), 4);
        let sched = build_schedule(&PolicySpec {
            kind: PolicyKind::Naive,
            n: m.n_samples(),
            n0: m.n_samples(),
            e: 5,
            e0: 0,
            ef: 0,
            m: 1,
        })
        .unwrap();
        let cfg = SimConfig { epochs: 5, batch_size: 8, seed: 42, ..SimConfig::default() };
        let a = train((&m, &labels), (&tm, &tl), &ord, &sched, &cfg).unwrap();
        let b = train((&m, &labels), (&tm, &tl), &ord, &sched, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = train((&m, &labels), (&tm, &tl), &ord, &sched, &SimConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&c).unwrap(),
            "different seeds should change the report"
        );
    }

    #[test]
    fn alpha_zero_ignores_pool_contents() {
        let spec = blob_spec(2, 10, 6.0);
        let (m1, labels) = gen_blobs(&spec, 1).unwrap();
        // Same geometry, different point noise: a different unlabelled pool.
        let (m2, _) = gen_blobs(&spec, 9).unwrap();
        let sel = select_random(m1.n_samples(), 4, 3).unwrap();
        let ord = random_order(&sel, 3);
        let sched = build_schedule(&PolicySpec {
            kind: PolicyKind::Naive,
            n: 4,
            n0: 4,
            e: 4,
            e0: 0,
            ef: 0,
            m: 1,
        })
        .unwrap();
        let cfg = SimConfig { epochs: 4, alpha: 0.0, batch_size: 4, seed: 7, ..SimConfig::default() };
        // Swap-pool trick: train on pools whose selected rows agree.
        let mut data2 = m1.data().to_vec();
        for i in 0..m1.n_samples() {
            if !sel.indices.contains(&i) {
                for t in 0..m1.dim() {
                    data2[i * m1.dim() + t] = m2.get(i, t);
                }
            }
        }
        let swapped = EmbeddingMatrix::new(m1.ids().to_vec(), data2, m1.dim()).unwrap();
        let a = train((&m1, &labels), (&m1, &labels), &ord, &sched, &cfg).unwrap();
        let b = train((&swapped, &labels), (&m1, &labels), &ord, &sched, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn tau_zero_rate_is_one() {
        let spec = blob_spec(2, 8, 4.0);
        let (m, labels) = gen_blobs(&spec, 1).unwrap();
        let ord = full_ordering(m.n_samples(), 2);
        let sched = build_schedule(&PolicySpec {
            kind: PolicyKind::Naive,
            n: m.n_samples(),
            n0: m.n_samples(),
            e: 3,
            e0: 0,
            ef: 0,
            m: 1,
        })
        .unwrap();
        // tau must be > 0 per the config contract; use the smallest positive
        // value, which every confidence (>= 1/c) clears.
        let cfg = SimConfig { epochs: 3, tau: f64::MIN_POSITIVE, batch_size: 4, ..SimConfig::default() };
        let report = train((&m, &labels), (&m, &labels), &ord, &sched, &cfg).unwrap();
        for rate in report.pseudo_label_rate_curve {
            assert_eq!(rate, 1.0);
        }
    }

    #[test]
    fn schedule_length_must_match_epochs() {
        let spec = blob_spec(2, 4, 4.0);
        let (m, labels) = gen_blobs(&spec, 1).unwrap();
        let ord = full_ordering(m.n_samples(), 2);
        let sched = SupervisionSchedule { counts: vec![1, 1] };
        let cfg = SimConfig { epochs: 3, ..SimConfig::default() };
        assert!(matches!(
            train((&m, &labels), (&m, &labels), &ord, &sched, &cfg),
            Err(SimError::ScheduleMismatch { schedule_len: 2, epochs: 3 })
        ));
    }
}
