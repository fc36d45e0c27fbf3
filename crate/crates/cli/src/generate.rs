use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use mrnn::corpus::tokenize;
use mrnn::inference::{generate, GenerationConfig, GenerationMode};

use crate::config::FileConfig;
use crate::io::{load_features, load_model};
use crate::ModelArgs;

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    features: PathBuf,
    /// Image ids to caption (repeatable).
    #[arg(long = "image", required = true)]
    images: Vec<String>,
    /// TOML file; only `mode`, `max_length` and `seed` are used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `greedy` or `sample`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Words the caption must start with.
    #[arg(long)]
    prefix: Option<String>,
}

pub fn run(args: GenerateArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let (params, vocab) = load_model(&args.model)?;
    let features = load_features(&args.features)?;
    let mode: GenerationMode = match args.mode.as_ref().or(file.mode.as_ref()) {
        Some(m) => m.parse()?,
        None => GenerationMode::Greedy,
    };
    let mut prefix = Vec::new();
    if let Some(p) = &args.prefix {
        for word in tokenize(p) {
            let index = vocab
                .index_of(&word)
                .ok_or_else(|| anyhow::anyhow!("prefix word `{word}` is not in the vocabulary"))?;
            prefix.push(index);
        }
    }
    let cfg = GenerationConfig {
        mode,
        max_length: args.max_len.or(file.max_length).unwrap_or(50),
        prefix,
        seed: args.seed.or(file.seed).unwrap_or(0),
        exact_length: None,
    };
    for id in &args.images {
        let image = features.get(id)?;
        let tokens = generate(&params, image, &cfg)?;
        println!("{id}\t{}", vocab.decode_to_string(&tokens));
    }
    Ok(())
}
