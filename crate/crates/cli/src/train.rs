use std::fs::File;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use mrnn::corpus::assemble;
use mrnn::numerics::InitScheme;
use mrnn::training::{train_with_progress, TrainConfig};
use serde::Serialize;

use crate::config::FileConfig;
use crate::io::{create_dir, load_data, write_json, write_text};
use crate::manifest::{FileHash, RunManifest};
use crate::{DataArgs, VariantArg};

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// TOML file with training and model settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for model.mrnm, vocab.txt, report.csv and manifest.json.
    #[arg(long, default_value = "run")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Global gradient-norm cap; 0 disables clipping.
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Refuse to run unless config, seeds and input hashes match this
    /// earlier manifest.
    #[arg(long)]
    verify_manifest: Option<PathBuf>,
    /// No per-epoch progress on stderr.
    #[arg(long)]
    quiet: bool,
}

/// The resolved settings recorded in the manifest.
#[derive(Debug, Clone, Serialize)]
struct Settings {
    variant: String,
    embed1_dim: usize,
    embed2_dim: usize,
    recurrent_dim: usize,
    multimodal_dim: usize,
    init: String,
    learning_rate: f64,
    lambda_reg: f64,
    batch_size: usize,
    epochs: usize,
    clip_norm: f64,
    seed: u64,
    eval_every: usize,
    min_count: usize,
}

fn resolve(args: &TrainArgs, file: &FileConfig) -> Result<(TrainConfig, usize)> {
    let d = TrainConfig::default();
    let variant = match (args.variant, &file.variant) {
        (Some(v), _) => v.into(),
        (None, Some(s)) => s.parse()?,
        (None, None) => d.variant,
    };
    let init = match &file.init {
        Some(s) => s.parse::<InitScheme>()?,
        None => d.init,
    };
    let clip = args.clip_norm.or(file.clip_norm).or(d.clip_norm).unwrap_or(0.0);
    let cfg = TrainConfig {
        learning_rate: args.lr.or(file.learning_rate).unwrap_or(d.learning_rate),
        lambda_reg: args.lambda.or(file.lambda_reg).unwrap_or(d.lambda_reg),
        batch_size: args.batch_size.or(file.batch_size).unwrap_or(d.batch_size),
        epochs: args.epochs.or(file.epochs).unwrap_or(d.epochs),
        clip_norm: (clip != 0.0).then_some(clip),
        seed: args.seed.or(file.seed).unwrap_or(d.seed),
        eval_every: file.eval_every.unwrap_or(d.eval_every),
        variant,
        embed1_dim: file.embed1_dim.unwrap_or(d.embed1_dim),
        embed2_dim: file.embed2_dim.unwrap_or(d.embed2_dim),
        recurrent_dim: file.recurrent_dim.unwrap_or(d.recurrent_dim),
        multimodal_dim: file.multimodal_dim.unwrap_or(d.multimodal_dim),
        init,
        checkpoint: None,
    };
    cfg.validate()?;
    Ok((cfg, file.min_count.unwrap_or(1)))
}

pub fn run(args: TrainArgs) -> Result<()> {
    let file_cfg = FileConfig::load(args.config.as_deref())?;
    let (mut cfg, min_count) = resolve(&args, &file_cfg)?;
    let settings = Settings {
        variant: cfg.variant.to_string(),
        embed1_dim: cfg.embed1_dim,
        embed2_dim: cfg.embed2_dim,
        recurrent_dim: cfg.recurrent_dim,
        multimodal_dim: cfg.multimodal_dim,
        init: cfg.init.to_string(),
        learning_rate: cfg.learning_rate,
        lambda_reg: cfg.lambda_reg,
        batch_size: cfg.batch_size,
        epochs: cfg.epochs,
        clip_norm: cfg.clip_norm.unwrap_or(0.0),
        seed: cfg.seed,
        eval_every: cfg.eval_every,
        min_count,
    };

    let mut manifest = RunManifest::new("train", serde_json::to_value(&settings)?);
    manifest.seeds.insert("train".into(), cfg.seed);
    for (name, path) in [
        ("captions", &args.data.captions),
        ("splits", &args.data.splits),
        ("features", &args.data.features),
    ] {
        manifest.inputs.insert(name.into(), FileHash::of(path)?);
    }
    if let Some(path) = &args.verify_manifest {
        manifest.check_against(&RunManifest::load(path)?)?;
    }

    let data = load_data(&args.data)?;
    let (vocab, split) = assemble(&data.records, &data.splits, min_count)?;
    split.check_features(&data.features).context("checking captions against features")?;

    create_dir(&args.out)?;
    let model_path = args.out.join("model.mrnm");
    cfg.checkpoint = Some(model_path.clone());
    let total = cfg.epochs;
    let quiet = args.quiet;
    let (params, report) = train_with_progress(&cfg, vocab.len(), &split, &data.features, |e| {
        if !quiet {
            let val = e.val_ppl.map(|v| format!(" val_ppl {v:.4}")).unwrap_or_default();
            eprintln!("epoch {}/{} cost {:.4}{} ({:.2}s)", e.epoch, total, e.cost, val, e.seconds);
        }
    })?;

    let vocab_path = args.out.join("vocab.txt");
    let f = File::create(&vocab_path).with_context(|| format!("creating {}", vocab_path.display()))?;
    vocab.write_to(f)?;
    let report_path = args.out.join("report.csv");
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write_text(&report_path, &String::from_utf8(csv)?)?;

    for (name, path) in [("checkpoint", &model_path), ("vocab", &vocab_path)] {
        manifest.artifacts.insert(name.into(), FileHash::of(path)?);
    }
    write_json(&args.out.join("manifest.json"), &manifest)?;

    let last = report.epochs.last();
    println!(
        "trained {} ({} parameters) for {} epochs: cost {} val_ppl {}; wrote {}",
        cfg.variant,
        params.num_params(),
        report.epochs.len(),
        last.map(|e| format!("{:.4}", e.cost)).unwrap_or_else(|| "-".into()),
        report.last_val_ppl().map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
        args.out.display()
    );
    Ok(())
}
