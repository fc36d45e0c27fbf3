use anyhow::Result;
use clap::Args;
use mrnn::model::nearest_words;

use crate::io::load_model;
use crate::ModelArgs;

#[derive(Args, Debug)]
pub struct NearestArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    word: String,
    #[arg(short, long, default_value_t = 10)]
    k: usize,
}

pub fn run(args: NearestArgs) -> Result<()> {
    let (params, vocab) = load_model(&args.model)?;
    for (word, dist) in nearest_words(&params, &vocab, &args.word, args.k)? {
        println!("{word}\t{dist:.6}");
    }
    Ok(())
}
