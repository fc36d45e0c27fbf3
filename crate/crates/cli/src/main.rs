use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod config;
mod eval;
mod generate;
mod gradcheck;
mod io;
mod manifest;
mod nearest;
mod synth;
mod train;

#[derive(Parser, Debug)]
#[command(name = "mrnn", version, about = "Multimodal RNN caption models: train, generate, retrieve, evaluate")]
struct Cli {
    /// Worker threads for batch gradients and evaluation (results do not
    /// depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic captioned-image corpus.
    Synth(synth::SynthArgs),
    /// Train a model and write checkpoint, vocabulary, report and manifest.
    Train(train::TrainArgs),
    /// Caption images with a trained model.
    Generate(generate::GenerateArgs),
    /// Perplexity, BLEU, retrieval and recall-curve evaluation.
    #[command(subcommand)]
    Eval(eval::EvalCommand),
    /// Compare backpropagated gradients with finite differences.
    Gradcheck(gradcheck::GradcheckArgs),
    /// Nearest neighbours of a word in the learned embedding.
    Nearest(nearest::NearestArgs),
}

/// `--model` plus the vocabulary that goes with it.
#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Defaults to `vocab.txt` next to the model.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

/// Caption, split and feature files.
#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    #[arg(long)]
    pub captions: PathBuf,
    #[arg(long)]
    pub splits: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariantArg {
    Mrnn,
    Baseline,
}

impl From<VariantArg> for mrnn::model::Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Mrnn => Self::Multimodal,
            VariantArg::Baseline => Self::SimpleRnn,
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        anyhow::ensure!(n >= 1, "--threads must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Synth(a) => synth::run(a),
        Command::Train(a) => train::run(a),
        Command::Generate(a) => generate::run(a),
        Command::Eval(c) => eval::run(c),
        Command::Gradcheck(a) => gradcheck::run(a),
        Command::Nearest(a) => nearest::run(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
