use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hyperneg::hypercore::{load_hypergraph, save_hypergraph, split_dataset, write_remap, Hypergraph, LoadReport, Split, SynthParams};
use hyperneg::metrics::{build_eval_sets, evaluate_sets, EvalSet};
use hyperneg::nnkit::Checkpoint;
use hyperneg::sampler::{load_negatives, save_negatives, CandidateHyperedge, NegSpec, NegStrategy};
use hyperneg::seed;
use hyperneg::trainer::{bench_epochs, boundary_trace, non_decreasing_fraction, train, train_from, TrainConfig, Trainer, Variant};
use hyperneg::model::Models;
use hyperneg::{Error, ErrorKind, Result};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const GRAPH: &str = "graph.txt";
const FEATURES: &str = "features.txt";
const SPLIT: &str = "split.txt";
const MANIFEST: &str = "manifest.json";

#[derive(Parser)]
#[command(name = "hyperneg", version, about = "Hyperedge prediction with generated negative hyperedges")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load or synthesize a hypergraph, split it and pre-generate test negatives.
    Prepare(PrepareArgs),
    /// Train one variant on a prepared dataset.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test split.
    Eval(EvalArgs),
    /// Time training epochs of two variants and report their speed ratio.
    Bench(BenchArgs),
    /// Batch-mean classifier score along the denoising chain.
    Trace(TraceArgs),
}

#[derive(Args)]
struct PrepareArgs {
    /// Hyperedge list file, one hyperedge per line.
    #[arg(long, conflicts_with = "synth")]
    data: Option<PathBuf>,
    /// Feature file matching --data.
    #[arg(long, requires = "data")]
    features: Option<PathBuf>,
    /// Synthetic dataset as nodes,hyperedges,min_size,max_size,communities.
    #[arg(long, value_delimiter = ',')]
    synth: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "SNS,MNS,CNS")]
    strategies: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunOpts {
    /// Prepared dataset directory.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunOpts,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    run: RunOpts,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value = "SNS,MNS,CNS,MIX")]
    strategies: String,
    /// Results CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    run: RunOpts,
    #[arg(long, value_delimiter = ',', default_value = "SEHP,SEHP-epre")]
    variants: Vec<Variant>,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    /// Timing CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    run: RunOpts,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 100)]
    batches: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Written next to every artifact set before any work starts.
#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    command: String,
    config: Option<String>,
    dataset_fingerprint: String,
    seeds: Vec<(String, u64)>,
    variant: Option<String>,
    output: PathBuf,
    /// Files holding wall-clock records for this run.
    timings: Vec<String>,
    dataset: Option<DatasetStats>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DatasetStats {
    nodes: usize,
    hyperedges: usize,
    mean_hyperedge_size: f64,
    feature_dim: usize,
    deduplicated_lines: usize,
    rejected_small: usize,
    test_negative_root: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Prepare(a) => prepare(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Trace(a) => cmd_trace(a),
    };
    match res {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Input => 2,
                ErrorKind::Validation => 3,
                ErrorKind::Runtime => 4,
            })
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn write_manifest(dir: &Path, m: &RunManifest) -> Result<PathBuf> {
    let p = dir.join(MANIFEST);
    write(&p, &(serde_json::to_string_pretty(m).expect("manifest serialises") + "\n"))?;
    Ok(p)
}

fn neg_file(s: NegStrategy) -> String {
    format!("neg_test_{}.txt", s.name().to_lowercase())
}

fn fingerprint(dir: &Path) -> Result<String> {
    let mut h = Sha256::new();
    for name in [GRAPH, FEATURES, SPLIT] {
        let p = dir.join(name);
        let bytes = std::fs::read(&p).map_err(io_err(&p))?;
        h.update(name.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

fn prepare(a: PrepareArgs) -> Result<Vec<PathBuf>> {
    let strategies = NegStrategy::parse_list(&a.strategies)?;
    let (g, report) = match (&a.data, &a.synth) {
        (Some(path), _) => load_hypergraph(path, a.features.as_deref())?,
        (None, Some(p)) => {
            if p.len() != 5 {
                return Err(Error::InvalidArgument("--synth takes five comma-separated integers".into()));
            }
            let g = SynthParams { nodes: p[0], hyperedges: p[1], min_size: p[2], max_size: p[3], communities: p[4], seed: a.seed }.build()?;
            let report = LoadReport {
                node_count: g.node_count(),
                hyperedge_count: g.hyperedge_count(),
                mean_hyperedge_size: g.mean_hyperedge_size(),
                deduplicated_lines: Vec::new(),
                rejected_small: 0,
                remap: None,
            };
            (g, report)
        }
        (None, None) => return Err(Error::InvalidArgument("one of --data or --synth is required".into())),
    };
    std::fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let split = split_dataset(&g, seed::derive(a.seed, "split", 0))?;
    let mut written = vec![a.out.join(GRAPH), a.out.join(FEATURES), a.out.join(SPLIT)];
    save_hypergraph(&g, &written[0], &written[1])?;
    write(&written[2], &split.to_text())?;
    if let Some(remap) = &report.remap {
        let p = a.out.join("remap.txt");
        write_remap(&p, remap)?;
        written.push(p);
    }
    let root = seed::derive(a.seed, "test-negatives", 0);
    for set in build_eval_sets(&g, &split.test, &strategies, root)? {
        let p = a.out.join(neg_file(set.strategy));
        let spec = NegSpec { strategy: set.strategy, count: set.negatives.len(), seed: seed::derive(root, "eval-negatives", set.strategy as u64) };
        save_negatives(&p, spec, &set.negatives)?;
        written.push(p);
    }
    let stats = DatasetStats {
        nodes: report.node_count,
        hyperedges: report.hyperedge_count,
        mean_hyperedge_size: report.mean_hyperedge_size,
        feature_dim: g.feature_dim(),
        deduplicated_lines: report.deduplicated_lines.len(),
        rejected_small: report.rejected_small,
        test_negative_root: root,
    };
    info!("prepared n={} m={} mean size {:.3}", stats.nodes, stats.hyperedges, stats.mean_hyperedge_size);
    let manifest = RunManifest {
        command: "prepare".into(),
        config: None,
        dataset_fingerprint: fingerprint(&a.out)?,
        seeds: vec![("root".into(), a.seed), ("test_negatives".into(), root)],
        variant: None,
        output: a.out.clone(),
        timings: Vec::new(),
        dataset: Some(stats),
    };
    written.push(write_manifest(&a.out, &manifest)?);
    Ok(written)
}

struct Dataset {
    g: Hypergraph,
    split: Split,
    fingerprint: String,
    stats: DatasetStats,
}

fn load_dataset(dir: &Path) -> Result<Dataset> {
    let (g, _) = load_hypergraph(&dir.join(GRAPH), Some(&dir.join(FEATURES)))?;
    let sp = dir.join(SPLIT);
    let split = Split::parse(&std::fs::read_to_string(&sp).map_err(io_err(&sp))?, &sp.display().to_string())?;
    split.validate(g.hyperedge_count())?;
    let mp = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&mp).map_err(io_err(&mp))?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| Error::Parse { file: mp.display().to_string(), line: e.line(), msg: e.to_string() })?;
    let stats = manifest.dataset.ok_or_else(|| Error::InvalidArgument(format!("{} is not a dataset manifest", mp.display())))?;
    let fingerprint = fingerprint(dir)?;
    if fingerprint != manifest.dataset_fingerprint {
        warn!("dataset files in {} changed since prepare", dir.display());
    }
    Ok(Dataset { g, split, fingerprint, stats })
}

fn resolve_config(run: &RunOpts) -> Result<TrainConfig> {
    let mut cfg = match &run.config {
        Some(p) => TrainConfig::from_file(p)?,
        None => TrainConfig::default(),
    };
    if let Some(v) = run.variant {
        cfg.variant = v;
    }
    if let Some(s) = run.seed {
        cfg.seed = s;
    }
    if let Some(e) = run.epochs {
        cfg.epochs = e;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_manifest(command: &str, cfg: &TrainConfig, data: &Dataset, out: &Path, timings: &[&str]) -> RunManifest {
    RunManifest {
        command: command.into(),
        config: Some(cfg.to_text()),
        dataset_fingerprint: data.fingerprint.clone(),
        seeds: vec![("train".into(), cfg.seed), ("test_negatives".into(), data.stats.test_negative_root)],
        variant: Some(cfg.variant.to_string()),
        output: out.to_path_buf(),
        timings: timings.iter().map(|s| s.to_string()).collect(),
        dataset: None,
    }
}

fn cmd_train(a: TrainArgs) -> Result<Vec<PathBuf>> {
    let cfg = resolve_config(&a.run)?;
    let data = load_dataset(&a.run.data)?;
    std::fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let manifest = write_manifest(&a.out, &run_manifest("train", &cfg, &data, &a.out, &["history.csv"]))?;
    let outcome = match &a.resume {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            train_from(Trainer::resume(&data.g, &data.split, cfg, &ck)?, Some(&a.out))?
        }
        None => train(&data.g, &data.split, cfg, Some(&a.out))?,
    };
    info!("best epoch {} with validation AUROC {:.4}", outcome.best_epoch, outcome.best_auroc);
    Ok(vec![manifest, a.out.join("best.ckpt"), a.out.join("last.ckpt"), a.out.join("history.csv")])
}

fn load_models(path: &Path) -> Result<Models> {
    Models::from_checkpoint(&Checkpoint::load(path)?)
}

/// Test sets for `strategies`, reusing prepared negative files where present.
fn test_sets(dir: &Path, data: &Dataset, strategies: &[NegStrategy]) -> Result<Vec<EvalSet>> {
    let positives: Vec<CandidateHyperedge> = data.split.test.iter().map(|&j| CandidateHyperedge::positive(&data.g, j)).collect();
    strategies
        .iter()
        .map(|&s| {
            let p = dir.join(neg_file(s));
            if p.exists() {
                let (spec, negatives) = load_negatives(&p)?;
                if spec.strategy != s || negatives.len() != positives.len() {
                    return Err(Error::InvalidHypergraph(format!("{} does not match the test split", p.display())));
                }
                Ok(EvalSet { strategy: s, positives: positives.clone(), negatives })
            } else {
                let mut sets = build_eval_sets(&data.g, &data.split.test, &[s], data.stats.test_negative_root)?;
                Ok(sets.remove(0))
            }
        })
        .collect()
}

fn cmd_eval(a: EvalArgs) -> Result<Vec<PathBuf>> {
    let cfg = resolve_config(&a.run)?;
    let strategies = NegStrategy::parse_list(&a.strategies)?;
    let data = load_dataset(&a.run.data)?;
    let models = load_models(&a.checkpoint)?;
    let sets = test_sets(&a.run.data, &data, &strategies)?;
    let table = evaluate_sets(&models.discriminator, &data.g, &data.split.train, &sets, cfg.batch_size)?;
    let meta = vec![
        ("checkpoint".to_string(), a.checkpoint.display().to_string()),
        ("dataset_fingerprint".to_string(), data.fingerprint.clone()),
        ("test_negative_root".to_string(), data.stats.test_negative_root.to_string()),
    ];
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    write(&a.out, &table.to_csv(&meta))?;
    info!("test AUROC {:.4} (AVE)", table.ave_auroc());
    Ok(vec![a.out])
}

fn cmd_bench(a: BenchArgs) -> Result<Vec<PathBuf>> {
    let base = resolve_config(&a.run)?;
    if a.variants.len() != 2 {
        return Err(Error::InvalidArgument("--variants takes exactly two variants".into()));
    }
    let timed = a.run.epochs.unwrap_or(3).max(3);
    let data = load_dataset(&a.run.data)?;
    let mut csv = String::from("variant,mean_seconds,timed_epochs\n");
    let mut means = Vec::new();
    for &v in &a.variants {
        let cfg = TrainConfig { variant: v, ..base.clone() };
        let secs = bench_epochs(&data.g, &data.split, cfg, a.warmup, timed)?;
        let mean = secs.iter().sum::<f64>() / secs.len() as f64;
        info!("{v}: {mean:.3}s per epoch over {timed} epochs");
        csv.push_str(&format!("{v},{mean},{timed}\n"));
        means.push(mean);
    }
    let ratio = means[0] / means[1];
    info!("speed ratio {}/{}: {ratio:.2}", a.variants[0], a.variants[1]);
    csv.push_str(&format!("# speed_ratio={ratio}\n# warmup_epochs={}\n# dataset_fingerprint={}\n", a.warmup, data.fingerprint));
    write(&a.out, &csv)?;
    Ok(vec![a.out])
}

fn cmd_trace(a: TraceArgs) -> Result<Vec<PathBuf>> {
    let cfg = resolve_config(&a.run)?;
    let data = load_dataset(&a.run.data)?;
    let models = load_models(&a.checkpoint)?;
    let traces = boundary_trace(&models, &data.g, &data.split.train, &cfg, a.batches, cfg.seed)?;
    let mut csv = String::from("batch");
    for t in 0..=cfg.steps {
        csv.push_str(&format!(",s{t}"));
    }
    csv.push('\n');
    for (b, tr) in traces.iter().enumerate() {
        csv.push_str(&b.to_string());
        for s in tr {
            csv.push_str(&format!(",{s}"));
        }
        csv.push('\n');
    }
    csv.push_str(&format!("# non_decreasing_fraction={}\n", non_decreasing_fraction(&traces)));
    write(&a.out, &csv)?;
    Ok(vec![a.out])
}
