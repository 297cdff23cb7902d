use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use patchstill::config::{ConfigError, ModelKind};
use patchstill::{Error, Pipeline, PipelineConfig};

const SEED_ENV: &str = "PATCHSTILL_SEED";

/// Foreground-aware dataset distillation.
#[derive(Debug, Parser)]
#[command(name = "patchstill", version)]
struct Cli {
    /// TOML config file. Flags override its values.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Occupancy ratios, per-class thresholds and histograms.
    Analyze,
    /// Build the distilled dataset with soft labels.
    Distill,
    /// Analysis outputs plus foreground retention per selection policy.
    Report,
    /// Thresholds, path counts and retention across quantiles.
    Sweep {
        /// Comma-separated quantiles.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9"
        )]
        quantiles: Vec<f64>,
    },
}

#[derive(Debug, Args)]
struct Overrides {
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    masks: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    quantile: Option<f64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Candidate crops per sparse image.
    #[arg(short = 'k', long = "candidates", global = true)]
    k: Option<usize>,
    /// Patches per distilled image (perfect square).
    #[arg(short = 'z', long, global = true)]
    z: Option<usize>,
    #[arg(long, global = true)]
    n_ipc: Option<usize>,
    #[arg(long, global = true)]
    distilled_side: Option<u32>,
    /// Teacher crops per distilled image.
    #[arg(short = 'm', long = "label-crops", global = true)]
    m: Option<usize>,
    /// ONNX observer model; implies `scorer.kind = "model"`.
    #[arg(long, global = true)]
    scorer_model: Option<PathBuf>,
    /// ONNX teacher model; implies `label.kind = "model"`.
    #[arg(long, global = true)]
    teacher_model: Option<PathBuf>,
    /// Segmenter command template with {image}, {prompt} and {out}.
    #[arg(long, global = true)]
    segmenter: Option<String>,
    /// Cycle through ranked patches when a class is too small.
    #[arg(long, global = true)]
    allow_duplicates: bool,
    /// Log and exclude unreadable images instead of aborting.
    #[arg(long, global = true)]
    skip_bad_images: bool,
}

fn build_config(cli: &Cli) -> Result<PipelineConfig, Error> {
    let o = &cli.overrides;
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => {
            let missing =
                |flag: &str| ConfigError::Invalid(format!("--{flag} is required without --config"));
            PipelineConfig::new(
                o.dataset.clone().ok_or_else(|| missing("dataset"))?,
                o.masks.clone().ok_or_else(|| missing("masks"))?,
                o.out.clone().ok_or_else(|| missing("out"))?,
            )
        }
    };
    if let Ok(seed) = std::env::var(SEED_ENV) {
        cfg.seed = seed
            .trim()
            .parse()
            .map_err(|_| ConfigError::Invalid(format!("{SEED_ENV}={seed:?} is not a u64")))?;
    }
    if let Some(v) = &o.dataset {
        cfg.dataset_root = v.clone();
    }
    if let Some(v) = &o.masks {
        cfg.masks_root = v.clone();
    }
    if let Some(v) = &o.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.quantile {
        cfg.quantile = v;
    }
    if let Some(v) = o.workers {
        cfg.workers = v;
    }
    if let Some(v) = o.k {
        cfg.select.k = v;
    }
    if let Some(v) = o.z {
        cfg.z = v;
    }
    if let Some(v) = o.n_ipc {
        cfg.n_ipc = v;
    }
    if let Some(v) = o.distilled_side {
        cfg.distilled_side = v;
    }
    if let Some(v) = o.m {
        cfg.label.m = v;
    }
    if let Some(v) = &o.scorer_model {
        cfg.scorer.kind = ModelKind::Model;
        cfg.scorer.model = Some(v.clone());
    }
    if let Some(v) = &o.teacher_model {
        cfg.label.kind = Some(ModelKind::Model);
        cfg.label.model = Some(v.clone());
    }
    if let Some(v) = &o.segmenter {
        cfg.segmenter.command = Some(v.clone());
    }
    cfg.allow_duplicates |= o.allow_duplicates;
    cfg.skip_bad_images |= o.skip_bad_images;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let pipeline = Pipeline::new(build_config(cli)?)?;
    let out = pipeline.config().out_dir.display().to_string();
    match &cli.command {
        Command::Analyze => {
            let a = pipeline.run_analyze()?;
            for t in &a.thresholds {
                println!(
                    "{:>3} {:<20} n={:<6} threshold={:.6}",
                    t.class_id, t.name, t.count, t.threshold
                );
            }
            println!("analysis written to {out}");
        }
        Command::Distill => {
            let record = pipeline.run_distill()?;
            let images = record
                .outputs
                .keys()
                .filter(|k| k.ends_with(".png"))
                .count();
            println!("{images} distilled images written to {out}");
            println!("config hash {}", record.config_hash);
        }
        Command::Report => {
            for r in pipeline.run_report()? {
                println!(
                    "{:<12} mean retention {:.6}",
                    r.policy.name(),
                    r.mean_retention
                );
            }
            println!("report written to {out}/report");
        }
        Command::Sweep { quantiles } => {
            for row in pipeline.run_sweep(quantiles)? {
                println!(
                    "q={:.2} crop={:<6} resize={:<6} retention={:.6}",
                    row.quantile, row.crop_count, row.resize_count, row.dynamic_retention
                );
            }
            println!("sweep written to {out}/report/sweep.csv");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
