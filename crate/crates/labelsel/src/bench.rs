//! Seeded multi-trial harness: random sampling versus cluster selection,
//! naive versus scheduled supervision, reported as mean ± std over paired
//! seeds.
//!
//! The design is paired: per repetition seed, one train pool and one test
//! pool are generated and shared by every method, and every trial of that
//! repetition uses the same simulator seed. Deltas and win rates are
//! therefore computed on identical seed pairs against the random-sampling
//! baseline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::ClusterParams;
use crate::curriculum::{self, OrderedSelection};
use crate::ingest;
use crate::policy::{self, PolicyKind, PolicySpec};
use crate::seeding;
use crate::select::{self, ClustererKind, SelectionMethod, SelectionMode, SelectionResult};
use crate::sslsim::{self, BlobSpec, SimConfig, SimError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark config: {0}")]
    ConfigError(String),
    #[error("trial failed for method `{method}`, seed {seed_index}: {source}")]
    Trial {
        method: String,
        seed_index: usize,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

/// One selection strategy under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: SelectionMethod,
    pub mode: SelectionMode,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub clusterer: Option<ClustererKind>,
}

impl MethodSpec {
    /// Stable label used in report rows: `method/mode[/clusterer]`.
    pub fn label(&self) -> String {
        let method = match self.method {
            SelectionMethod::ClusterSelect => "cluster-select",
            SelectionMethod::Random => "random",
        };
        let mode = match self.mode {
            SelectionMode::Imbalanced => "imbalanced",
            SelectionMode::Balanced => "balanced",
        };
        match self.clusterer {
            Some(c) => format!("{method}/{mode}/{}", c.as_str()),
            None => format!("{method}/{mode}"),
        }
    }
}

/// Policy entry in the config. `n` comes from the budget under test and `e`
/// from `sim.epochs`; `n0` is clamped to the budget, `ef` defaults to `e`
/// (to `e0` for late-jump), and naive pins `n0 = n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyTemplate {
    pub name: String,
    pub kind: PolicyKind,
    #[serde(default)]
    pub n0: usize,
    #[serde(default)]
    pub e0: usize,
    #[serde(default)]
    pub ef: Option<usize>,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub curriculum: bool,
}

fn default_m() -> usize {
    1
}

impl PolicyTemplate {
    pub fn resolve(&self, budget: usize, epochs: usize) -> PolicySpec {
        let ef = match self.kind {
            PolicyKind::Naive => self.e0,
            PolicyKind::LateJump => self.e0,
            _ => self.ef.unwrap_or(epochs).min(epochs),
        };
        let n0 = match self.kind {
            PolicyKind::Naive => budget,
            _ => self.n0.min(budget),
        };
        PolicySpec {
            kind: self.kind,
            n: budget,
            n0,
            e: epochs,
            e0: self.e0.min(epochs),
            ef: ef.max(self.e0.min(epochs)),
            m: self.m,
        }
    }
}

/// Proxy-prediction settings used when a curriculum policy is present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProxySpec {
    /// Cluster count for the proxy model; defaults to the class count.
    pub k: Option<usize>,
    pub temperature: f64,
}

impl Default for ProxySpec {
    fn default() -> Self {
        Self { k: None, temperature: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    pub blobs: BlobSpec,
    /// Held-out pool size per class; defaults to `blobs.per_class`.
    #[serde(default)]
    pub test_per_class: Option<usize>,
    pub budgets: Vec<usize>,
    pub methods: Vec<MethodSpec>,
    pub policies: Vec<PolicyTemplate>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub proxy: ProxySpec,
    #[serde(default)]
    pub cluster_params: ClusterParams,
}

fn default_seeds() -> usize {
    3
}

impl BenchConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, BenchError> {
        let cfg: BenchConfig =
            toml::from_str(text).map_err(|e| BenchError::ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.seeds < 1 {
            return Err(BenchError::ConfigError("seeds must be at least 1".into()));
        }
        if self.budgets.is_empty() {
            return Err(BenchError::ConfigError("budgets must be non-empty".into()));
        }
        if self.methods.is_empty() {
            return Err(BenchError::ConfigError("methods must be non-empty".into()));
        }
        if self.policies.is_empty() {
            return Err(BenchError::ConfigError("policies must be non-empty".into()));
        }
        for m in &self.methods {
            if m.method == SelectionMethod::ClusterSelect && m.clusterer.is_none() {
                return Err(BenchError::ConfigError(
                    "cluster-select methods need a clusterer".into(),
                ));
            }
        }
        self.blobs.validate().map_err(|e| BenchError::ConfigError(e.to_string()))?;
        self.sim.validate().map_err(|e| BenchError::ConfigError(e.to_string()))?;
        Ok(())
    }
}

/// Train/test content hashes for one repetition (FNV-1a over the binary
/// serialization plus the labels CSV).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataHashes {
    pub train: u64,
    pub test: u64,
}

/// Aggregates for one (method, budget, policy) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub method: MethodSpec,
    pub budget: usize,
    pub policy: String,
    pub per_seed_accuracy: Vec<f64>,
    pub mean: f64,
    /// Sample (n-1) standard deviation; 0 for a single seed.
    pub std: f64,
    /// Mean of per-seed (this - baseline) accuracy deltas.
    pub delta_vs_random: f64,
    /// Fraction of seeds where this method's accuracy >= the baseline's.
    pub win_rate: f64,
    pub data_hashes: Vec<DataHashes>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seeds: usize,
    pub cells: Vec<Cell>,
    pub config: BenchConfig,
}

pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn run_selection(
    method: &MethodSpec,
    m: &ingest::EmbeddingMatrix,
    labels: &ingest::LabelAssignment,
    budget: usize,
    params: &ClusterParams,
    seed: u64,
) -> Result<SelectionResult, select::SelectError> {
    match (method.method, method.mode) {
        (SelectionMethod::Random, SelectionMode::Imbalanced) => {
            select::select_random(m.n_samples(), budget, seed)
        }
        (SelectionMethod::Random, SelectionMode::Balanced) => {
            select::select_random_balanced(labels, budget, seed)
        }
        (SelectionMethod::ClusterSelect, SelectionMode::Imbalanced) => {
            select::select_by_clustering(m, budget, method.clusterer.unwrap(), params, seed)
        }
        (SelectionMethod::ClusterSelect, SelectionMode::Balanced) => {
            select::select_balanced(m, labels, budget, method.clusterer.unwrap(), params, seed)
        }
    }
}

/// Runs the full grid: `methods x budgets x policies x seeds` trials on
/// paired data, then aggregates.
pub fn run_comparison(cfg: &BenchConfig) -> Result<ComparisonReport, BenchError> {
    cfg.validate()?;
    let needs_proxy = cfg.policies.iter().any(|p| p.curriculum);
    let mut accuracy = std::collections::BTreeMap::<(usize, usize, usize, usize), f64>::new();
    let mut hashes = Vec::with_capacity(cfg.seeds);

    for seed_index in 0..cfg.seeds {
        let blob = BlobSpec {
            seed: seeding::derive(cfg.blobs.seed, "bench-data", seed_index as u64),
            ..cfg.blobs
        };
        let test_blob =
            BlobSpec { per_class: cfg.test_per_class.unwrap_or(cfg.blobs.per_class), ..blob };
        let ctx = |e: SimError| BenchError::Trial {
            method: "data-generation".into(),
            seed_index,
            source: Box::new(e),
        };
        let (train_m, train_labels) =
            sslsim::gen_blobs(&blob, seeding::derive(blob.seed, "train", 0)).map_err(ctx)?;
        let (test_m, test_labels) =
            sslsim::gen_blobs(&test_blob, seeding::derive(blob.seed, "test", 0)).map_err(ctx)?;
        hashes.push(DataHashes {
            train: data_hash(&train_m, &train_labels),
            test: data_hash(&test_m, &test_labels),
        });

        let preds = if needs_proxy {
            let k = cfg.proxy.k.unwrap_or(cfg.blobs.classes);
            Some(
                sslsim::proxy_predictions(
                    &train_m,
                    k,
                    cfg.proxy.temperature,
                    seeding::derive(cfg.sim.seed, "proxy", seed_index as u64),
                )
                .map_err(|e| BenchError::Trial {
                    method: "proxy-predictions".into(),
                    seed_index,
                    source: Box::new(e),
                })?,
            )
        } else {
            None
        };

        let selection_seed = seeding::derive(cfg.sim.seed, "selection", seed_index as u64);
        let order_seed = seeding::derive(cfg.sim.seed, "order", seed_index as u64);
        let trial_seed = seeding::derive(cfg.sim.seed, "trial", seed_index as u64);

        for (mi, method) in cfg.methods.iter().enumerate() {
            for (bi, &budget) in cfg.budgets.iter().enumerate() {
                let selection = run_selection(
                    method,
                    &train_m,
                    &train_labels,
                    budget,
                    &cfg.cluster_params,
                    selection_seed,
                )
                .map_err(|e| BenchError::Trial {
                    method: method.label(),
                    seed_index,
                    source: Box::new(e),
                })?;
                for (pi, policy) in cfg.policies.iter().enumerate() {
                    let spec = policy.resolve(budget, cfg.sim.epochs);
                    let trial_err = |e: Box<dyn std::error::Error + Send + Sync>| BenchError::Trial {
                        method: format!("{} [{}]", method.label(), policy.name),
                        seed_index,
                        source: e,
                    };
                    let sched = policy::build_schedule(&spec).map_err(|e| trial_err(Box::new(e)))?;
                    let ord: OrderedSelection = if policy.curriculum {
                        curriculum::curriculum_order(preds.as_ref().unwrap(), &selection)
                            .map_err(|e| trial_err(Box::new(e)))?
                    } else {
                        curriculum::random_order(&selection, order_seed)
                    };
                    let sim = SimConfig { seed: trial_seed, ..cfg.sim };
                    let report = sslsim::train(
                        (&train_m, &train_labels),
                        (&test_m, &test_labels),
                        &ord,
                        &sched,
                        &sim,
                    )
                    .map_err(|e| trial_err(Box::new(e)))?;
                    accuracy.insert((mi, bi, pi, seed_index), report.test_accuracy);
                }
            }
        }
    }

    // Baseline per cell: the first random method with the same mode, else the
    // first random method, else the cell itself.
    let baseline_for = |mode: SelectionMode| -> Option<usize> {
        cfg.methods
            .iter()
            .position(|m| m.method == SelectionMethod::Random && m.mode == mode)
            .or_else(|| cfg.methods.iter().position(|m| m.method == SelectionMethod::Random))
    };

    let mut cells = Vec::new();
    for (mi, method) in cfg.methods.iter().enumerate() {
        for (bi, &budget) in cfg.budgets.iter().enumerate() {
            for (pi, policy) in cfg.policies.iter().enumerate() {
                let per_seed: Vec<f64> =
                    (0..cfg.seeds).map(|s| accuracy[&(mi, bi, pi, s)]).collect();
                let base_mi = baseline_for(method.mode).unwrap_or(mi);
                let base: Vec<f64> =
                    (0..cfg.seeds).map(|s| accuracy[&(base_mi, bi, pi, s)]).collect();
                let deltas: Vec<f64> =
                    per_seed.iter().zip(base.iter()).map(|(a, b)| a - b).collect();
                let wins =
                    per_seed.iter().zip(base.iter()).filter(|(a, b)| a >= b).count();
                let (mean, std) = mean_and_std(&per_seed);
                cells.push(Cell {
                    method: *method,
                    budget,
                    policy: policy.name.clone(),
                    per_seed_accuracy: per_seed,
                    mean,
                    std,
                    delta_vs_random: deltas.iter().sum::<f64>() / cfg.seeds as f64,
                    win_rate: wins as f64 / cfg.seeds as f64,
                    data_hashes: hashes.clone(),
                });
            }
        }
    }
    Ok(ComparisonReport { seeds: cfg.seeds, cells, config: cfg.clone() })
}

fn data_hash(m: &ingest::EmbeddingMatrix, labels: &ingest::LabelAssignment) -> u64 {
    let bin = ingest::embeddings_to_bin(m).expect("generated pools have contiguous ids");
    let labels_csv = ingest::labels_to_csv(labels);
    seeding::fnv1a_chain(&[&bin, labels_csv.as_bytes()])
}

/// Rendered outputs of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    /// `method,budget,policy,mean,std,delta_vs_random,win_rate` rows at full
    /// precision.
    pub csv: String,
    /// Aligned text table; accuracies as percent with two decimals, std
    /// listed as the sample standard deviation.
    pub table: String,
}

pub fn summarize(report: &ComparisonReport) -> Summary {
    let mut csv = String::from("method,budget,policy,mean,std,delta_vs_random,win_rate\n");
    for cell in &report.cells {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            cell.method.label(),
            cell.budget,
            cell.policy,
            cell.mean,
            cell.std,
            cell.delta_vs_random,
            cell.win_rate
        ));
    }

    let headers = ["method", "budget", "policy", "accuracy % (mean±std)", "Δ vs RS (pp)", "win rate"];
    let mut rows: Vec<[String; 6]> = Vec::new();
    for cell in &report.cells {
        rows.push([
            cell.method.label(),
            cell.budget.to_string(),
            cell.policy.clone(),
            format!("{:.2}±{:.2}", cell.mean * 100.0, cell.std * 100.0),
            format!("{:+.2}", cell.delta_vs_random * 100.0),
            format!("{:.2}", cell.win_rate),
        ]);
    }
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row.iter()) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut table = String::new();
    let render = |fields: &[String], widths: &[usize]| -> String {
        let mut line = String::new();
        for (i, (f, w)) in fields.iter().zip(widths.iter()).enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(f);
            for _ in f.chars().count()..*w {
                line.push(' ');
            }
        }
        line.trim_end().to_string()
    };
    let header_fields: Vec<String> = headers.iter().map(|s| s.to_string()).collect();
    table.push_str(&render(&header_fields, &widths));
    table.push('\n');
    for row in rows {
        table.push_str(&render(&row, &widths));
        table.push('\n');
    }
    Summary { csv, table }
}

/// Accuracy-versus-budget series for external plotting:
/// `method,policy,budget,mean,std` rows.
pub fn plot_data_csv(report: &ComparisonReport) -> String {
    let mut out = String::from("method,policy,budget,mean,std\n");
    for cell in &report.cells {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            cell.method.label(),
            cell.policy,
            cell.budget,
            cell.mean,
            cell.std
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> BenchConfig {
        BenchConfig {
            seeds: 2,
            blobs: BlobSpec { classes: 2, dim: 2, per_class: 15, spread: 1.0, separation: 6.0, seed: 5 },
            test_per_class: Some(10),
            budgets: vec![2, 4],
            methods: vec![
                MethodSpec {
                    method: SelectionMethod::Random,
                    mode: SelectionMode::Imbalanced,
                    clusterer: None,
                },
                MethodSpec {
                    method: SelectionMethod::ClusterSelect,
                    mode: SelectionMode::Imbalanced,
                    clusterer: Some(ClustererKind::KMeans),
                },
            ],
            policies: vec![PolicyTemplate {
                name: "naive".into(),
                kind: PolicyKind::Naive,
                n0: 0,
                e0: 0,
                ef: None,
                m: 1,
                curriculum: false,
            }],
            sim: SimConfig { epochs: 3, batch_size: 8, ..SimConfig::default() },
            proxy: ProxySpec::default(),
            cluster_params: ClusterParams { restarts: 3, ..ClusterParams::default() },
        }
    }

    #[test]
    fn random_only_self_comparison() {
        let mut cfg = tiny_config();
        cfg.methods.truncate(1);
        cfg.budgets = vec![3];
        cfg.seeds = 1;
        let report = run_comparison(&cfg).unwrap();
        assert_eq!(report.cells.len(), 1);
        let cell = &report.cells[0];
        assert_eq!(cell.delta_vs_random, 0.0);
        assert_eq!(cell.win_rate, 1.0);
        assert_eq!(cell.std, 0.0);
    }

    #[test]
    fn seeds_are_counted_per_cell() {
        let cfg = tiny_config();
        let report = run_comparison(&cfg).unwrap();
        assert_eq!(report.cells.len(), 4);
        for cell in &report.cells {
            assert_eq!(cell.per_seed_accuracy.len(), 2);
            let (mean, std) = mean_and_std(&cell.per_seed_accuracy);
            assert_eq!(mean, cell.mean);
            assert_eq!(std, cell.std);
            assert_eq!(cell.data_hashes.len(), 2);
        }
    }

    #[test]
    fn duplicate_method_rows_are_identical() {
        let mut cfg = tiny_config();
        cfg.methods = vec![cfg.methods[0], cfg.methods[0]];
        cfg.budgets = vec![3];
        let report = run_comparison(&cfg).unwrap();
        assert_eq!(report.cells.len(), 2);
        assert_eq!(report.cells[0].per_seed_accuracy, report.cells[1].per_seed_accuracy);
    }

    #[test]
    fn paired_rows_share_data_hashes() {
        let report = run_comparison(&tiny_config()).unwrap();
        let first = &report.cells[0].data_hashes;
        for cell in &report.cells[1..] {
            assert_eq!(&cell.data_hashes, first);
        }
    }

    #[test]
    fn report_bytes_are_deterministic() {
        let cfg = tiny_config();
        let a = serde_json::to_string(&run_comparison(&cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&run_comparison(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn summarize_formats_percent() {
        let cfg = tiny_config();
        let mut report = run_comparison(&cfg).unwrap();
        report.cells.truncate(1);
        report.cells[0].mean = 0.25051;
        report.cells[0].std = 0.011;
        let summary = summarize(&report);
        assert!(summary.table.contains("25.05"), "table:\n{}", summary.table);
        let mut lines = summary.csv.lines();
        assert_eq!(lines.next().unwrap(), "method,budget,policy,mean,std,delta_vs_random,win_rate");
    }

    #[test]
    fn summarize_empty_report_is_header_only() {
        let cfg = tiny_config();
        let report = ComparisonReport { seeds: 0, cells: vec![], config: cfg };
        let summary = summarize(&report);
        assert_eq!(summary.csv, "method,budget,policy,mean,std,delta_vs_random,win_rate\n");
    }

    #[test]
    fn csv_round_trips_cell_values() {
        let report = run_comparison(&tiny_config()).unwrap();
        let summary = summarize(&report);
        for (line, cell) in summary.csv.lines().skip(1).zip(report.cells.iter()) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields[0], cell.method.label());
            assert_eq!(fields[1].parse::<usize>().unwrap(), cell.budget);
            assert_eq!(fields[3].parse::<f64>().unwrap(), cell.mean);
            assert_eq!(fields[4].parse::<f64>().unwrap(), cell.std);
            assert_eq!(fields[5].parse::<f64>().unwrap(), cell.delta_vs_random);
            assert_eq!(fields[6].parse::<f64>().unwrap(), cell.win_rate);
        }
    }

    #[test]
    fn toml_config_round_trip() {
        let text = r#"
seeds = 2
budgets = [4]

[blobs]
classes = 2
dim = 2
per_class = 10
spread = 1.0
separation = 5.0
seed = 3

[[methods]]
method = "random"
mode = "imbalanced"

[[methods]]
method = "cluster-select"
mode = "balanced"
clusterer = "kmeans++"

[[policies]]
name = "naive"
kind = "naive"

[sim]
epochs = 2
batch_size = 4
"#;
        let cfg = BenchConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.seeds, 2);
        assert_eq!(cfg.methods[1].clusterer, Some(ClustererKind::KMeansPlusPlus));
        assert_eq!(cfg.sim.tau, 0.95);
        let report = run_comparison(&cfg).unwrap();
        assert_eq!(report.cells.len(), 2);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = tiny_config();
        cfg.budgets.clear();
        assert!(matches!(run_comparison(&cfg), Err(BenchError::ConfigError(_))));
        let mut cfg = tiny_config();
        cfg.methods[1].clusterer = None;
        assert!(matches!(run_comparison(&cfg), Err(BenchError::ConfigError(_))));
    }
}
