//! `labelsel`: one subcommand per pipeline stage, wired through files.
//!
//! Exit codes: 0 on success, 1 for flag/config validation problems, 2 for
//! runtime errors surfaced by the library. Every output file embeds the tool
//! version, the fully resolved flag set, and the seed (JSON outputs under a
//! `meta` key, CSV outputs as leading `#` comments), so any artifact can be
//! regenerated from its own header.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use labelsel::bench::{self, BenchConfig};
use labelsel::cluster::{ClusterParams, PlusPlusVariant};
use labelsel::curriculum::{self, OrderedSelection};
use labelsel::ingest;
use labelsel::policy::{self, PolicyKind, PolicySpec};
use labelsel::seeding;
use labelsel::select::{self, ClustererKind, SelectionResult};
use labelsel::sslsim::{self, BlobSpec, SimConfig};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "labelsel",
    version,
    about = "Labelled-set selection, supervision schedules, and a desk-scale semi-supervised simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic gaussian-blob embeddings (EMB1) and labels (CSV)
    GenData(GenDataArgs),
    /// Choose a labelled set from an embedding pool by clustering
    Select(SelectArgs),
    /// Order a selection easy-to-hard by prediction entropy
    Curriculum(CurriculumArgs),
    /// Build a supervision schedule CSV from a policy
    Schedule(ScheduleArgs),
    /// Run one simulator trial described by a config file
    Simulate(SimulateArgs),
    /// Run a paired multi-seed benchmark described by a config file
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Number of classes (blobs)
    #[arg(long)]
    classes: usize,
    /// Feature dimensionality
    #[arg(long)]
    dim: usize,
    /// Points per class
    #[arg(long)]
    per_class: usize,
    /// Within-class standard deviation
    #[arg(long)]
    spread: f64,
    /// Minimum distance between class means
    #[arg(long)]
    separation: f64,
    /// Seed; fixes the blob geometry shared by train and test splits
    #[arg(long)]
    seed: u64,
    /// Which draw stream to use: same geometry, independent points
    #[arg(long, default_value = "train", value_parser = ["train", "test"])]
    split: String,
    /// Output stem: writes <out>.emb1 and <out>.labels.csv
    #[arg(long)]
    out: PathBuf,
    /// Optionally write proxy predictions (softmaxed k-means distances) here
    #[arg(long)]
    predictions_out: Option<PathBuf>,
    /// Cluster count for proxy predictions (default: --classes)
    #[arg(long)]
    proxy_k: Option<usize>,
    /// Softmax temperature for proxy predictions
    #[arg(long, default_value_t = 1.0)]
    proxy_temperature: f64,
}

#[derive(Args)]
struct SelectArgs {
    /// Embedding pool, EMB1 or CSV (detected by magic bytes)
    #[arg(long)]
    embeddings: PathBuf,
    /// Number of samples to select
    #[arg(long)]
    n: usize,
    #[arg(long, value_parser = ["kmeans", "kmeans++", "bisecting", "bisecting++"])]
    clusterer: String,
    #[arg(long, default_value = "imbalanced", value_parser = ["imbalanced", "balanced"])]
    mode: String,
    /// Ground-truth labels CSV; required for balanced mode
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    /// Selection JSON output path
    #[arg(long)]
    out: PathBuf,
    /// Independent clustering restarts, best WCSS wins
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Lloyd iteration cap
    #[arg(long, default_value_t = 300)]
    max_iters: usize,
    /// Relative WCSS improvement threshold for convergence
    #[arg(long, default_value_t = 1e-6)]
    rel_tol: f64,
    #[arg(long, default_value = "greedy-farthest", value_parser = ["greedy-farthest", "d2-sampling"])]
    plusplus_variant: String,
}

#[derive(Args)]
struct CurriculumArgs {
    /// Predictions CSV (id,p0,...), rows in pool order
    #[arg(long)]
    predictions: PathBuf,
    /// Selection JSON produced by `select`
    #[arg(long)]
    selection: PathBuf,
    /// Ordering JSON output path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long, value_parser = ["naive", "linear", "step", "late-jump", "late-linear"])]
    policy: String,
    /// Total labelled count
    #[arg(long)]
    n: usize,
    /// Initial labelled count (default: 0, or n for naive)
    #[arg(long)]
    n0: Option<usize>,
    /// Total epochs
    #[arg(long)]
    epochs: usize,
    /// Injection start epoch
    #[arg(long, default_value_t = 0)]
    e0: usize,
    /// Injection end epoch (default: epochs; forced to e0 for late-jump)
    #[arg(long)]
    ef: Option<usize>,
    /// Step chunk size (step policy)
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Schedule CSV output path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Trial config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Trial report JSON output path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Directory for report.json / report.csv / report.txt
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write accuracy-vs-budget series to plot.csv
    #[arg(long, default_value_t = false)]
    plot_data: bool,
}

enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

fn validation(msg: impl Display) -> CliError {
    CliError::Validation(msg.to_string())
}

fn runtime(err: impl std::error::Error) -> CliError {
    let mut msg = err.to_string();
    let mut source = err.source();
    while let Some(s) = source {
        msg.push_str(": ");
        msg.push_str(&s.to_string());
        source = s.source();
    }
    CliError::Runtime(msg)
}

/// Reproducibility header written into every output file.
#[derive(Serialize)]
struct Meta {
    version: String,
    command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    flags: BTreeMap<String, String>,
}

impl Meta {
    fn new(command: &str, seed: Option<u64>, flags: &[(&str, String)]) -> Self {
        Self {
            version: VERSION.to_string(),
            command: command.to_string(),
            seed,
            flags: flags.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        }
    }

    fn csv_header(&self) -> String {
        let mut out = format!("# labelsel {}\n# command: {}\n", self.version, self.command);
        if let Some(seed) = self.seed {
            out.push_str(&format!("# seed: {seed}\n"));
        }
        let flags: Vec<String> = self.flags.iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.push_str(&format!("# flags: {}\n", flags.join(" ")));
        out
    }
}

fn json_with_meta<T: Serialize>(payload: &T, meta: &Meta) -> Result<String, CliError> {
    let mut value = serde_json::to_value(payload).map_err(runtime)?;
    let obj = value.as_object_mut().expect("payloads serialize to objects");
    obj.insert("meta".to_string(), serde_json::to_value(meta).map_err(runtime)?);
    let mut text = serde_json::to_string_pretty(&value).map_err(runtime)?;
    text.push('\n');
    Ok(text)
}

fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn check_readable(flag: &str, path: &Path) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(validation(format!("{flag}: no such file: {}", path.display())));
    }
    Ok(())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprint!("{e}");
            std::process::exit(1);
        }
    };
    let result = match cli.command {
        Command::GenData(args) => gen_data(args),
        Command::Select(args) => run_select(args),
        Command::Curriculum(args) => run_curriculum(args),
        Command::Schedule(args) => run_schedule(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Bench(args) => run_bench(args),
    };
    if let Err(err) = result {
        eprintln!("error: {}", err.message());
        std::process::exit(err.exit_code());
    }
}

fn gen_data(args: GenDataArgs) -> Result<(), CliError> {
    let spec = BlobSpec {
        classes: args.classes,
        dim: args.dim,
        per_class: args.per_class,
        spread: args.spread,
        separation: args.separation,
        seed: args.seed,
    };
    spec.validate().map_err(|e| validation(e))?;
    let split_index = u64::from(args.split == "test");
    let draw_seed = seeding::derive(args.seed, "gen-split", split_index);
    let (matrix, labels) = sslsim::gen_blobs(&spec, draw_seed).map_err(runtime)?;

    let mut flags = vec![
        ("classes", args.classes.to_string()),
        ("dim", args.dim.to_string()),
        ("per-class", args.per_class.to_string()),
        ("spread", args.spread.to_string()),
        ("separation", args.separation.to_string()),
        ("seed", args.seed.to_string()),
        ("split", args.split.clone()),
        ("out", args.out.display().to_string()),
    ];
    if let Some(p) = &args.predictions_out {
        flags.push(("predictions-out", p.display().to_string()));
        flags.push(("proxy-k", args.proxy_k.unwrap_or(args.classes).to_string()));
        flags.push(("proxy-temperature", args.proxy_temperature.to_string()));
    }
    let meta = Meta::new("gen-data", Some(args.seed), &flags);

    let emb_path = PathBuf::from(format!("{}.emb1", args.out.display()));
    let labels_path = PathBuf::from(format!("{}.labels.csv", args.out.display()));
    let bin = ingest::embeddings_to_bin(&matrix).map_err(runtime)?;
    fs::write(&emb_path, bin)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", emb_path.display())))?;
    let labels_csv = format!("{}{}", meta.csv_header(), ingest::labels_to_csv(&labels));
    write_output(&labels_path, &labels_csv)?;

    if let Some(pred_path) = &args.predictions_out {
        let k = args.proxy_k.unwrap_or(args.classes);
        let preds = sslsim::proxy_predictions(
            &matrix,
            k,
            args.proxy_temperature,
            seeding::derive(args.seed, "proxy", split_index),
        )
        .map_err(runtime)?;
        let csv = format!("{}{}", meta.csv_header(), ingest::predictions_to_csv(&preds));
        write_output(pred_path, &csv)?;
    }
    Ok(())
}

fn parse_clusterer(s: &str) -> ClustererKind {
    match s {
        "kmeans" => ClustererKind::KMeans,
        "kmeans++" => ClustererKind::KMeansPlusPlus,
        "bisecting" => ClustererKind::Bisecting,
        _ => ClustererKind::BisectingPlusPlus,
    }
}

fn run_select(args: SelectArgs) -> Result<(), CliError> {
    if args.mode == "balanced" && args.labels.is_none() {
        return Err(validation("--mode balanced requires --labels"));
    }
    check_readable("--embeddings", &args.embeddings)?;
    if let Some(labels) = &args.labels {
        check_readable("--labels", labels)?;
    }
    let matrix = ingest::read_embeddings_auto(&args.embeddings).map_err(runtime)?;
    let clusterer = parse_clusterer(&args.clusterer);
    let params = ClusterParams {
        max_iters: args.max_iters,
        rel_tol: args.rel_tol,
        restarts: args.restarts,
        plusplus_variant: if args.plusplus_variant == "d2-sampling" {
            PlusPlusVariant::D2Sampling
        } else {
            PlusPlusVariant::GreedyFarthest
        },
    };
    if params.max_iters == 0 || params.restarts == 0 {
        return Err(validation("--max-iters and --restarts must be at least 1"));
    }

    let result: SelectionResult = if args.mode == "balanced" {
        let labels = ingest::read_labels(args.labels.as_ref().unwrap()).map_err(runtime)?;
        select::select_balanced(&matrix, &labels, args.n, clusterer, &params, args.seed)
            .map_err(runtime)?
    } else {
        select::select_by_clustering(&matrix, args.n, clusterer, &params, args.seed)
            .map_err(runtime)?
    };

    let mut flags = vec![
        ("embeddings", args.embeddings.display().to_string()),
        ("n", args.n.to_string()),
        ("clusterer", args.clusterer.clone()),
        ("mode", args.mode.clone()),
        ("seed", args.seed.to_string()),
        ("out", args.out.display().to_string()),
        ("restarts", args.restarts.to_string()),
        ("max-iters", args.max_iters.to_string()),
        ("rel-tol", args.rel_tol.to_string()),
        ("plusplus-variant", args.plusplus_variant.clone()),
    ];
    if let Some(labels) = &args.labels {
        flags.push(("labels", labels.display().to_string()));
    }
    let meta = Meta::new("select", Some(args.seed), &flags);
    write_output(&args.out, &json_with_meta(&result, &meta)?)
}

fn run_curriculum(args: CurriculumArgs) -> Result<(), CliError> {
    check_readable("--predictions", &args.predictions)?;
    check_readable("--selection", &args.selection)?;
    let preds = ingest::read_predictions(&args.predictions).map_err(runtime)?;
    let text = fs::read_to_string(&args.selection)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", args.selection.display())))?;
    let selection: SelectionResult = serde_json::from_str(&text)
        .map_err(|e| CliError::Runtime(format!("bad selection JSON: {e}")))?;
    let ordering = curriculum::curriculum_order(&preds, &selection).map_err(runtime)?;

    let flags = vec![
        ("predictions", args.predictions.display().to_string()),
        ("selection", args.selection.display().to_string()),
        ("out", args.out.display().to_string()),
    ];
    let meta = Meta::new("curriculum", Some(selection.seed), &flags);
    // The file format carries ranking, order, and scores; the base selection
    // stays in its own file.
    #[derive(Serialize)]
    struct OrderingFile<'a> {
        ranking: &'a labelsel::curriculum::RankingKind,
        order: &'a [usize],
        #[serde(skip_serializing_if = "Option::is_none")]
        scores: &'a Option<Vec<f64>>,
    }
    let payload = OrderingFile {
        ranking: &ordering.ranking,
        order: &ordering.order,
        scores: &ordering.scores,
    };
    write_output(&args.out, &json_with_meta(&payload, &meta)?)
}

fn run_schedule(args: ScheduleArgs) -> Result<(), CliError> {
    let kind = match args.policy.as_str() {
        "naive" => PolicyKind::Naive,
        "linear" => PolicyKind::Linear,
        "step" => PolicyKind::Step,
        "late-jump" => PolicyKind::LateJump,
        _ => PolicyKind::LateLinear,
    };
    let n0 = args.n0.unwrap_or(match kind {
        PolicyKind::Naive => args.n,
        _ => 0,
    });
    let ef = match kind {
        PolicyKind::Naive => args.e0,
        PolicyKind::LateJump => args.e0,
        _ => args.ef.unwrap_or(args.epochs),
    };
    let spec = PolicySpec { kind, n: args.n, n0, e: args.epochs, e0: args.e0, ef, m: args.m };
    let schedule = policy::build_schedule(&spec).map_err(|e| validation(e))?;

    let flags = vec![
        ("policy", args.policy.clone()),
        ("n", args.n.to_string()),
        ("n0", n0.to_string()),
        ("epochs", args.epochs.to_string()),
        ("e0", args.e0.to_string()),
        ("ef", ef.to_string()),
        ("m", args.m.to_string()),
        ("out", args.out.display().to_string()),
    ];
    let meta = Meta::new("schedule", None, &flags);
    let csv = format!("{}{}", meta.csv_header(), policy::schedule_to_csv(&schedule));
    write_output(&args.out, &csv)
}

#[derive(Deserialize)]
struct SimulateConfig {
    data: SimDataPaths,
    selection: PathSection,
    schedule: PathSection,
    ordering: OrderingConfig,
    #[serde(default)]
    sim: SimConfig,
}

#[derive(Deserialize)]
struct SimDataPaths {
    train_embeddings: PathBuf,
    train_labels: PathBuf,
    test_embeddings: PathBuf,
    test_labels: PathBuf,
}

#[derive(Deserialize)]
struct PathSection {
    path: PathBuf,
}

#[derive(Deserialize)]
struct OrderingConfig {
    kind: String,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    predictions: Option<PathBuf>,
}

fn resolve_against(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn run_simulate(args: SimulateArgs) -> Result<(), CliError> {
    check_readable("--config", &args.config)?;
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", args.config.display())))?;
    let cfg: SimulateConfig =
        toml::from_str(&text).map_err(|e| validation(format!("bad config: {e}")))?;
    cfg.sim.validate().map_err(|e| validation(e))?;
    if cfg.ordering.kind != "random" && cfg.ordering.kind != "curriculum" {
        return Err(validation(format!(
            "ordering.kind must be `random` or `curriculum`, got `{}`",
            cfg.ordering.kind
        )));
    }
    if cfg.ordering.kind == "curriculum" && cfg.ordering.predictions.is_none() {
        return Err(validation("ordering.kind = curriculum needs ordering.predictions"));
    }
    // Relative paths in the config resolve against the config's directory.
    let base = args.config.parent().unwrap_or(Path::new(".")).to_path_buf();

    let train_m =
        ingest::read_embeddings_auto(resolve_against(&base, &cfg.data.train_embeddings))
            .map_err(runtime)?;
    let train_l =
        ingest::read_labels(resolve_against(&base, &cfg.data.train_labels)).map_err(runtime)?;
    let test_m = ingest::read_embeddings_auto(resolve_against(&base, &cfg.data.test_embeddings))
        .map_err(runtime)?;
    let test_l =
        ingest::read_labels(resolve_against(&base, &cfg.data.test_labels)).map_err(runtime)?;

    let sel_path = resolve_against(&base, &cfg.selection.path);
    let sel_text = fs::read_to_string(&sel_path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", sel_path.display())))?;
    let selection: SelectionResult = serde_json::from_str(&sel_text)
        .map_err(|e| CliError::Runtime(format!("bad selection JSON: {e}")))?;

    let sched_path = resolve_against(&base, &cfg.schedule.path);
    let sched_text = fs::read_to_string(&sched_path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", sched_path.display())))?;
    let schedule = policy::parse_schedule_csv(&sched_text).map_err(runtime)?;

    let ordering: OrderedSelection = if cfg.ordering.kind == "curriculum" {
        let pred_path = resolve_against(&base, cfg.ordering.predictions.as_ref().unwrap());
        let preds = ingest::read_predictions(pred_path).map_err(runtime)?;
        curriculum::curriculum_order(&preds, &selection).map_err(runtime)?
    } else {
        let seed = cfg.ordering.seed.unwrap_or_else(|| seeding::derive(cfg.sim.seed, "order", 0));
        curriculum::random_order(&selection, seed)
    };

    let report = sslsim::train((&train_m, &train_l), (&test_m, &test_l), &ordering, &schedule, &cfg.sim)
        .map_err(runtime)?;

    let flags = vec![
        ("config", args.config.display().to_string()),
        ("out", args.out.display().to_string()),
    ];
    let meta = Meta::new("simulate", Some(cfg.sim.seed), &flags);
    write_output(&args.out, &json_with_meta(&report, &meta)?)
}

fn run_bench(args: BenchArgs) -> Result<(), CliError> {
    check_readable("--config", &args.config)?;
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", args.config.display())))?;
    let cfg = BenchConfig::from_toml_str(&text).map_err(|e| validation(e))?;
    let report = bench::run_comparison(&cfg).map_err(runtime)?;
    let summary = bench::summarize(&report);

    fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let flags = vec![
        ("config", args.config.display().to_string()),
        ("out-dir", args.out_dir.display().to_string()),
        ("plot-data", args.plot_data.to_string()),
    ];
    let meta = Meta::new("bench", Some(cfg.sim.seed), &flags);

    write_output(&args.out_dir.join("report.json"), &json_with_meta(&report, &meta)?)?;
    write_output(&args.out_dir.join("report.csv"), &format!("{}{}", meta.csv_header(), summary.csv))?;
    write_output(&args.out_dir.join("report.txt"), &format!("{}{}", meta.csv_header(), summary.table))?;
    if args.plot_data {
        write_output(
            &args.out_dir.join("plot.csv"),
            &format!("{}{}", meta.csv_header(), bench::plot_data_csv(&report)),
        )?;
    }
    Ok(())
}
