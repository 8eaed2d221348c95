//! Command-line front end: `gen`, `import`, `train`, `profile`, `prune`,
//! `loop`, `eval`.
//!
//! Each command writes a human-readable report plus a JSON summary carrying
//! the same numbers into `--out`. Outputs go through a temporary name and are
//! renamed only on success.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::ConfigFile;
use crate::dataio::synthetic::{generate_synthetic_stream, SyntheticConfig};
use crate::dataio::ubc::build_dataset;
use crate::dataio::{load_pair_file, load_ubc_patches, read_dataset, write_dataset, Normalization, PreprocessConfig};
use crate::error::{Error, Result};
use crate::evaluator::{evaluate, roc_csv, EvalReport};
use crate::loss::DEFAULT_MARGIN;
use crate::model::{load_model, save_model};
use crate::network::Network;
use crate::pipeline::{arch_specs, parse_activation, parse_arch, write_atomic, Seeds, DEFAULT_ARCH};
use crate::profiler::{frequency_histogram, profile_pairs};
use crate::pruner::{adaptive_loop, prune, select_prunable, LoopConfig, PruneReport, DEFAULT_THRESHOLD};
use crate::trainer::{train_with_validation, TrainConfig};
use crate::{Dataset32, Network32};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_LR: f64 = 0.01;
pub const DEFAULT_EPOCHS: usize = 20;
pub const DEFAULT_BATCH: usize = 32;
pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const DEFAULT_RETRAIN_EPOCHS: usize = 5;
pub const DEFAULT_MAX_ITER: usize = 5;
pub const DEFAULT_ROLLBACK_TOL: f64 = 1.0;

#[derive(Debug, Parser)]
#[command(name = "siamprune", version, about = "Siamese descriptor learning with activation-frequency pruning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic train/val datasets
    Gen(GenArgs),
    /// Convert a UBC patch directory plus pair file into a dataset file
    Import(ImportArgs),
    /// Train a network with the contrastive loss
    Train(TrainArgs),
    /// Measure per-neuron activation frequency
    Profile(ProfileArgs),
    /// Remove neurons below the activation threshold once
    Prune(PruneArgs),
    /// Run the iterative profile/prune/retrain loop
    Loop(LoopArgs),
    /// Report Error@95% on a pair set
    Eval(EvalArgs),
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// key=value configuration file; explicit flags win
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long = "per-point")]
    pub per_point: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "ubc-dir")]
    pub ubc_dir: Option<PathBuf>,
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Side of the resampled square patch
    #[arg(long)]
    pub side: Option<usize>,
    /// standardize | scale01
    #[arg(long)]
    pub norm: Option<String>,
    /// Output file stem (defaults to the pair file stem)
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct TrainFlags {
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Training dataset file
    #[arg(long = "train")]
    pub train_data: Option<PathBuf>,
    /// Optional validation dataset for per-epoch loss
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Start from this model instead of a fresh initialization
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Comma-separated widths, input first
    #[arg(long)]
    pub arch: Option<String>,
    /// Activation of the descriptor layer: relu | linear
    #[arg(long = "final-activation")]
    pub final_activation: Option<String>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LoopArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long = "train")]
    pub train_data: Option<PathBuf>,
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// Largest allowed Error@95% increase in percentage points
    #[arg(long = "rollback-tol")]
    pub rollback_tol: Option<f64>,
    /// Epochs of retraining after each prune
    #[arg(long = "retrain-epochs")]
    pub retrain_epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Also write roc.csv
    #[arg(long)]
    pub roc: bool,
}

struct Ctx {
    cfg: ConfigFile,
    seed: u64,
    out: PathBuf,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self> {
        let cfg = match &common.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let seed = cfg.pick(common.seed, "seed", DEFAULT_SEED)?;
        let out = cfg.pick(common.out.clone(), "out", PathBuf::from("."))?;
        Ok(Self { cfg, seed, out })
    }

    fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let p = self.out.join(name);
        write_atomic(&p, bytes.as_ref())?;
        Ok(p)
    }

    fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
        let mut s = serde_json::to_string_pretty(value).expect("json value serializes");
        s.push('\n');
        self.write(name, s)
    }

    fn train_config(&self, flags: &TrainFlags, epochs_key: &str, default_epochs: usize, epochs_flag: Option<usize>) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            learning_rate: self.cfg.pick(flags.lr, "lr", DEFAULT_LR)?,
            epochs: self.cfg.pick(epochs_flag, epochs_key, default_epochs)?,
            batch_size: self.cfg.pick(flags.batch_size, "batch_size", DEFAULT_BATCH)?,
            margin: self.cfg.pick(flags.margin, "margin", DEFAULT_MARGIN)?,
            shuffle_seed: Seeds::derive(self.seed).shuffle,
            momentum: self.cfg.pick(flags.momentum, "momentum", DEFAULT_MOMENTUM)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn dataset(path: &Path) -> Result<Dataset32> {
    read_dataset(path)
}

fn check_model_data(net: &Network32, ds: &Dataset32, what: &str) -> Result<()> {
    if net.input_width() != ds.dim() {
        return Err(Error::dim(net.input_width(), ds.dim(), format!("{what} dimension vs model input")));
    }
    if ds.pairs().is_empty() {
        return Err(Error::Input(format!("{what} has no pairs")));
    }
    Ok(())
}

fn source_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn eval_json(r: &EvalReport) -> serde_json::Value {
    json!({
        "error_at_95": r.error_at_95,
        "error_at_95_percent": format!("{:.2}", r.error_percent()),
        "threshold": r.threshold_used,
        "n_match": r.n_match,
        "n_nonmatch": r.n_nonmatch,
        "source": r.source,
    })
}

fn prune_json(r: &PruneReport) -> serde_json::Value {
    json!({
        "iteration": r.iteration,
        "layers": r.layers.iter().map(|l| json!({
            "name": l.name,
            "before": l.width_before,
            "after": l.width_after,
            "removed": l.removed_count,
            "removed_ratio": l.removed_ratio(),
            "removed_ratio_percent": format!("{:.1}", l.removed_ratio() * 100.0),
        })).collect::<Vec<_>>(),
    })
}

fn widths(net: &Network32) -> Vec<usize> {
    std::iter::once(net.input_width())
        .chain(net.layers().iter().map(|l| l.out_width()))
        .collect()
}

pub fn cmd_gen(a: &GenArgs) -> Result<()> {
    let ctx = Ctx::new(&a.common)?;
    let cfg = SyntheticConfig {
        n_points: ctx.cfg.pick(a.points, "points", 50)?,
        patches_per_point: ctx.cfg.pick(a.per_point, "per_point", 8)?,
        dim: ctx.cfg.pick(a.dim, "dim", 256)?,
        noise_sigma: ctx.cfg.pick(a.sigma, "sigma", 0.05)?,
    };
    let seed = Seeds::derive(ctx.seed).data;
    let train: Dataset32 = generate_synthetic_stream(seed, 0, &cfg)?;
    let val: Dataset32 = generate_synthetic_stream(seed, 1, &cfg)?;
    let tp = ctx.out.join("train.spds");
    let vp = ctx.out.join("val.spds");
    write_dataset(&tp, &train)?;
    write_dataset(&vp, &val)?;
    ctx.write_json(
        "gen_summary.json",
        &json!({
            "seed": ctx.seed,
            "data_seed": seed,
            "points": cfg.n_points,
            "per_point": cfg.patches_per_point,
            "dim": cfg.dim,
            "sigma": cfg.noise_sigma,
            "train": { "file": "train.spds", "vectors": train.len(), "pairs": train.pairs().len(), "matches": train.n_match() },
            "val": { "file": "val.spds", "vectors": val.len(), "pairs": val.pairs().len(), "matches": val.n_match() },
        }),
    )?;
    eprintln!("wrote {} and {}", tp.display(), vp.display());
    Ok(())
}

pub fn cmd_import(a: &ImportArgs) -> Result<()> {
    let ctx = Ctx::new(&a.common)?;
    let dir: PathBuf = ctx.cfg.require(a.ubc_dir.clone(), "ubc_dir")?;
    let pairs_path: PathBuf = ctx.cfg.require(a.pairs.clone(), "pairs")?;
    let norm: Normalization = ctx.cfg.pick(a.norm.clone(), "norm", "standardize".to_string())?.parse()?;
    let pcfg = PreprocessConfig {
        target_side: ctx.cfg.pick(a.side, "side", 16)?,
        normalization: norm,
    };
    if pcfg.target_side == 0 {
        return Err(Error::Usage("--side must be positive".into()));
    }
    let patches = load_ubc_patches(&dir)?;
    let pairs = load_pair_file(&pairs_path, patches.len())?;
    let ds: Dataset32 = build_dataset(&patches, &pairs, &pcfg)?;
    let stem = pairs_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "pairs".into());
    let name = ctx.cfg.pick(a.name.clone(), "name", stem)?;
    write_dataset(&ctx.out.join(format!("{name}.spds")), &ds)?;
    ctx.write_json(
        "import_summary.json",
        &json!({
            "patches": patches.len(),
            "pairs": ds.pairs().len(),
            "matches": ds.n_match(),
            "vectors": ds.len(),
            "dim": ds.dim(),
            "pair_file": source_name(&pairs_path),
            "file": format!("{name}.spds"),
        }),
    )?;
    Ok(())
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let ctx = Ctx::new(&a.common)?;
    let train_path: PathBuf = ctx.cfg.require(a.train_data.clone(), "train")?;
    let ds = dataset(&train_path)?;
    let val = ctx.cfg.pick_opt(a.val.clone(), "val")?.map(|p| dataset(&p)).transpose()?;
    let tcfg = ctx.train_config(&a.train, "epochs", DEFAULT_EPOCHS, a.train.epochs)?;

    let net: Network32 = match ctx.cfg.pick_opt(a.model.clone(), "model")? {
        Some(p) => load_model(&p)?,
        None => {
            let default_arch = DEFAULT_ARCH.map(|w| w.to_string()).join(",");
            let arch = parse_arch(&ctx.cfg.pick(a.arch.clone(), "arch", default_arch)?)?;
            let act = parse_activation(&ctx.cfg.pick(a.final_activation.clone(), "final_activation", "relu".into())?)?;
            Network::init(&arch_specs(&arch, act), Seeds::derive(ctx.seed).init)?
        }
    };
    check_model_data(&net, &ds, "training set")?;
    if let Some(v) = &val {
        check_model_data(&net, v, "validation set")?;
    }
    let pairs = ds.labeled_pairs();
    let val_pairs = val.as_ref().map(|v| v.labeled_pairs());
    let initial_loss = crate::trainer::dataset_loss(&net, &pairs, tcfg.margin)?;
    let (net, record) = train_with_validation(net, &pairs, val_pairs.as_deref(), &tcfg)?;
    eprintln!(
        "trained {} epochs in {:.2}s, final loss {:.6}",
        tcfg.epochs,
        record.wall_clock_secs,
        record.final_loss().unwrap_or(f64::NAN)
    );

    let mut text = format!("# initial_loss={initial_loss:.6}\nepoch train_loss");
    if record.validation_losses.is_some() {
        text.push_str(" val_loss");
    }
    text.push('\n');
    for (e, l) in record.epoch_losses.iter().enumerate() {
        text.push_str(&format!("{} {:.6}", e + 1, l));
        if let Some(v) = &record.validation_losses {
            text.push_str(&format!(" {:.6}", v[e]));
        }
        text.push('\n');
    }
    save_model(&net, &ctx.out.join("model.spnn"))?;
    ctx.write("train_report.txt", text)?;
    ctx.write_json(
        "train_summary.json",
        &json!({
            "config": tcfg,
            "architecture": widths(&net),
            "initial_loss": initial_loss,
            "epoch_losses": record.epoch_losses,
            "validation_losses": record.validation_losses,
            "model": "model.spnn",
        }),
    )?;
    Ok(())
}

pub fn cmd_profile(a: &ProfileArgs) -> Result<()> {
    let ctx = Ctx::new(&a.common)?;
    let net: Network32 = load_model(&ctx.cfg.require::<PathBuf>(a.model.clone(), "model")?)?;
    let ds = dataset(&ctx.cfg.require::<PathBuf>(a.data.clone(), "data")?)?;
    check_model_data(&net, &ds, "profiling set")?;
    let threshold = ctx.cfg.pick(a.threshold, "threshold", DEFAULT_THRESHOLD)?;
    let prof = profile_pairs(&net, &ds.labeled_pairs())?;
    let (below, fraction) = frequency_histogram(&prof, threshold, None)?;
    let per_layer = prof
        .layers
        .iter()
        .map(|l| {
            let (c, f) = frequency_histogram(&prof, threshold, Some(l.layer_index))?;
            Ok(json!({ "layer_index": l.layer_index, "width": l.counts.len(), "below_count": c, "below_fraction": f }))
        })
        .collect::<Result<Vec<_>>>()?;
    ctx.write("profile.txt", prof.to_text())?;
    ctx.write_json(
        "profile_summary.json",
        &json!({
            "samples": prof.sample_count,
            "threshold": threshold,
            "below_count": below,
            "below_fraction": fraction,
            "layers": per_layer,
        }),
    )?;
    eprintln!("{below} of {} neurons below {threshold} ({:.1}%)", prof.neuron_count(), fraction * 100.0);
    Ok(())
}

pub fn cmd_prune(a: &PruneArgs) -> Result<()> {
    let ctx = Ctx::new(&a.common)?;
    let net: Network32 = load_model(&ctx.cfg.require::<PathBuf>(a.model.clone(), "model")?)?;
    let ds = dataset(&ctx.cfg.require::<PathBuf>(a.data.clone(), "data")?)?;
    check_model_data(&net, &ds, "profiling set")?;
    let threshold = ctx.cfg.pick(a.threshold, "threshold", DEFAULT_THRESHOLD)?;
    let prof = profile_pairs(&net, &ds.labeled_pairs())?;
    let sel = select_prunable(&prof, threshold)?;
    for w in &sel.warnings {
        eprintln!("warning: {w}");
    }
    let (pruned, report) = prune(&net, &sel)?;
    save_model(&pruned, &ctx.out.join("pruned.spnn"))?;
    ctx.write("prune_report.txt", report.to_text())?;
    ctx.write_json(
        "prune_summary.json",
        &json!({ "threshold": threshold, "report": prune_json(&report), "warnings": sel.warnings, "model": "pruned.spnn" }),
    )?;
    Ok(())
}

pub fn cmd_loop(a: &LoopArgs) -> Result<()> {
    let ctx = Ctx::new(&a.common)?;
    let net: Network32 = load_model(&ctx.cfg.require::<PathBuf>(a.model.clone(), "model")?)?;
    let train_path: PathBuf = ctx.cfg.require(a.train_data.clone(), "train")?;
    let val_path: PathBuf = ctx.cfg.require(a.val.clone(), "val")?;
    let train_ds = dataset(&train_path)?;
    let val_ds = dataset(&val_path)?;
    check_model_data(&net, &train_ds, "training set")?;
    check_model_data(&net, &val_ds, "validation set")?;
    let retrain_epochs = a.retrain_epochs.or(a.train.epochs);
    let lcfg = LoopConfig {
        threshold: ctx.cfg.pick(a.threshold, "threshold", DEFAULT_THRESHOLD)?,
        max_iterations: ctx.cfg.pick(a.max_iter, "max_iter", DEFAULT_MAX_ITER)?,
        retrain: ctx.train_config(&a.train, "retrain_epochs", DEFAULT_RETRAIN_EPOCHS, retrain_epochs)?,
        rollback_tolerance: ctx.cfg.pick(a.rollback_tol, "rollback_tol", DEFAULT_ROLLBACK_TOL)?,
    };
    let initial_widths = widths(&net);
    let outcome = adaptive_loop(net, &train_ds.labeled_pairs(), &val_ds.labeled_pairs(), &lcfg)?;
    let source = source_name(&val_path);
    let tag = |mut r: EvalReport| {
        r.source = Some(source.clone());
        r
    };
    let baseline = tag(outcome.baseline.clone());
    let evals: Vec<EvalReport> = outcome.eval_reports.iter().cloned().map(tag).collect();
    let final_eval = tag(outcome.final_eval().clone());

    ctx.write("eval_report_baseline.txt", baseline.to_text())?;
    for (k, (p, e)) in outcome.prune_reports.iter().zip(&evals).enumerate() {
        ctx.write(&format!("prune_report_iter{k}.txt"), p.to_text())?;
        ctx.write(&format!("eval_report_iter{k}.txt"), e.to_text())?;
    }
    ctx.write("eval_report_final.txt", final_eval.to_text())?;
    save_model(&outcome.network, &ctx.out.join("model_final.spnn"))?;
    let final_widths = widths(&outcome.network);
    ctx.write_json(
        "loop_summary.json",
        &json!({
            "config": lcfg,
            "initial_widths": initial_widths,
            "final_widths": final_widths,
            "initial_neurons": initial_widths[1..].iter().sum::<usize>(),
            "final_neurons": final_widths[1..].iter().sum::<usize>(),
            "baseline": eval_json(&baseline),
            "iterations": outcome.prune_reports.iter().zip(&evals).map(|(p, e)| json!({
                "prune": prune_json(p),
                "eval": eval_json(e),
            })).collect::<Vec<_>>(),
            "final": eval_json(&final_eval),
            "stop": outcome.stop,
            "rolled_back_at": outcome.rolled_back_at,
            "model": "model_final.spnn",
        }),
    )?;
    eprintln!(
        "loop stopped ({:?}) after {} iteration(s); widths {:?} -> {:?}; Error@95% {:.2}% -> {:.2}%",
        outcome.stop,
        outcome.prune_reports.len(),
        initial_widths,
        final_widths,
        baseline.error_percent(),
        final_eval.error_percent()
    );
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let ctx = Ctx::new(&a.common)?;
    let net: Network32 = load_model(&ctx.cfg.require::<PathBuf>(a.model.clone(), "model")?)?;
    let data_path: PathBuf = ctx.cfg.require(a.data.clone(), "data")?;
    let ds = dataset(&data_path)?;
    check_model_data(&net, &ds, "evaluation set")?;
    let with_roc = a.roc || ctx.cfg.get::<bool>("roc")?.unwrap_or(false);
    let mut report = evaluate(&net, &ds.labeled_pairs(), with_roc)?;
    report.source = Some(source_name(&data_path));
    ctx.write("eval_report.txt", report.to_text())?;
    if let Some(roc) = &report.roc {
        ctx.write("roc.csv", roc_csv(roc))?;
    }
    ctx.write_json("eval_summary.json", &eval_json(&report))?;
    print!("{}", report.to_text());
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Import(a) => cmd_import(a),
        Command::Train(a) => cmd_train(a),
        Command::Profile(a) => cmd_profile(a),
        Command::Prune(a) => cmd_prune(a),
        Command::Loop(a) => cmd_loop(a),
        Command::Eval(a) => cmd_eval(a),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, S>(args: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Usage(e.to_string()))?;
    run(&cli)
}
