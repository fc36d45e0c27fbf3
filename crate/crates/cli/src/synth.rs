use std::fs::File;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use mrnn::corpus::{generate_synthetic_corpus, write_captions, write_splits, SynthConfig};
use mrnn::numerics::Rng;

use crate::io::create_dir;

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory for captions.tsv, splits.tsv and the feature file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    images: usize,
    #[arg(long, default_value_t = 3)]
    captions_per_image: usize,
    #[arg(long, default_value_t = 4)]
    topics: usize,
    #[arg(long, default_value_t = 8)]
    noise_dims: usize,
    #[arg(long, default_value_t = 0.1)]
    noise_std: f64,
    #[arg(long, default_value_t = 0.2)]
    val_fraction: f64,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write features.tsv instead of the binary features.mrnf.
    #[arg(long)]
    tsv_features: bool,
}

pub fn run(args: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_images: args.images,
        captions_per_image: args.captions_per_image,
        topics: args.topics,
        noise_dims: args.noise_dims,
        noise_std: args.noise_std,
        val_fraction: args.val_fraction,
        test_fraction: args.test_fraction,
    };
    let corpus = generate_synthetic_corpus(&mut Rng::new(args.seed), &cfg)?;
    create_dir(&args.out)?;

    let captions = args.out.join("captions.tsv");
    let f = File::create(&captions).with_context(|| format!("creating {}", captions.display()))?;
    write_captions(f, &corpus.records)?;
    let splits = args.out.join("splits.tsv");
    let f = File::create(&splits).with_context(|| format!("creating {}", splits.display()))?;
    write_splits(f, &corpus.splits)?;
    let features = if args.tsv_features {
        let path = args.out.join("features.tsv");
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        corpus.features.write_tsv(f)?;
        path
    } else {
        let path = args.out.join("features.mrnf");
        corpus.features.save(&path)?;
        path
    };
    println!(
        "wrote {} captions for {} images to {}, {}-d features in {}",
        corpus.records.len(),
        corpus.features.len(),
        args.out.display(),
        corpus.features.dim(),
        features.display()
    );
    Ok(())
}
