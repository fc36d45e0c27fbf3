use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use mrnn::corpus::{encode_splits, read_captions, tokenize, CaptionedExample, ImageFeatureStore, SplitKind};
use mrnn::evaluation::{
    bleu, caption_bleu, corpus_perplexity, default_fractions, image_to_text_queries, recall_curve, retrieval_eval,
    text_to_image_queries, BleuMode, BleuScore, RankingQuery, DEFAULT_KS,
};
use mrnn::inference::{sample_norm_images, GenerationConfig};
use mrnn::model::ModelParams;
use mrnn::numerics::{DenseVector, Rng};
use serde::Serialize;

use crate::io::{load_data, load_model, write_metrics};
use crate::{DataArgs, ModelArgs};

#[derive(Subcommand, Debug)]
pub enum EvalCommand {
    /// Word-weighted perplexity of a split.
    Ppl(PplArgs),
    /// Corpus BLEU-1/2/3 of generated or supplied captions.
    Bleu(BleuArgs),
    /// R@1/5/10 and median rank of the first groundtruth item.
    Retrieval(RetrievalArgs),
    /// Mean groundtruth matches against the fraction of candidates retrieved.
    Curve(CurveArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Image query, sentence candidates.
    I2t,
    /// Sentence query, image candidates.
    T2i,
}

impl Direction {
    fn name(self) -> &'static str {
        match self {
            Direction::I2t => "i2t",
            Direction::T2i => "t2i",
        }
    }
}

/// Model and data for model-based evaluation; all optional so that
/// file-based inputs can be used instead.
#[derive(Args, Debug)]
pub struct ModelSource {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    captions: Option<PathBuf>,
    #[arg(long)]
    splits: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    /// Which split to evaluate.
    #[arg(long, default_value = "test")]
    split: String,
}

struct Loaded {
    params: ModelParams,
    examples: Vec<CaptionedExample>,
    train_images: Vec<String>,
    features: ImageFeatureStore,
}

impl ModelSource {
    fn load(&self) -> Result<Loaded> {
        let missing = |flag: &str| anyhow!("{flag} is required for model-based evaluation");
        let model = ModelArgs {
            model: self.model.clone().ok_or_else(|| missing("--model"))?,
            vocab: self.vocab.clone(),
        };
        let data = DataArgs {
            captions: self.captions.clone().ok_or_else(|| missing("--captions"))?,
            splits: self.splits.clone().ok_or_else(|| missing("--splits"))?,
            features: self.features.clone().ok_or_else(|| missing("--features"))?,
        };
        let kind: SplitKind = self.split.parse()?;
        let (params, vocab) = load_model(&model)?;
        let data = load_data(&data)?;
        let split = encode_splits(&data.records, &data.splits, &vocab)?;
        split.check_features(&data.features)?;
        let examples = split.get(kind).to_vec();
        if examples.is_empty() {
            bail!("split `{kind}` has no captions");
        }
        let train_images = mrnn::corpus::image_ids(&split.train).into_iter().map(String::from).collect();
        Ok(Loaded {
            params,
            examples,
            train_images,
            features: data.features,
        })
    }
}

#[derive(Args, Debug)]
pub struct PplArgs {
    #[command(flatten)]
    source: ModelSource,
    /// Directory for ppl.csv and ppl.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BleuArgs {
    #[command(flatten)]
    source: ModelSource,
    /// `id<TAB>caption` file of candidates, one per id.
    #[arg(long, requires = "references")]
    candidates: Option<PathBuf>,
    /// `id<TAB>caption` file of references, any number per id.
    #[arg(long, requires = "candidates")]
    references: Option<PathBuf>,
    /// Generate exactly as many words as each image's first reference.
    #[arg(long)]
    length_matched: bool,
    /// Report order-n precision alone instead of the cumulative mean.
    #[arg(long)]
    order_only: bool,
    #[arg(long, default_value_t = 50)]
    max_len: usize,
    /// Directory for bleu.csv and bleu.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Where retrieval scores come from.
#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[command(flatten)]
    source: ModelSource,
    /// `query_id<TAB>candidate_id<TAB>score<TAB>is_gt` file (higher score
    /// is better); replaces the model.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Images averaged for the sentence marginal (sampled from the
    /// training split).
    #[arg(long, default_value_t = 100)]
    norm_images: usize,
    #[arg(long, default_value_t = 0)]
    norm_seed: u64,
    /// Restrict each image query to the captions of its nearest images.
    #[arg(long)]
    shortlist: Option<usize>,
}

#[derive(Args, Debug)]
pub struct RetrievalArgs {
    #[arg(value_enum)]
    direction: Direction,
    #[command(flatten)]
    scores: ScoreArgs,
    /// Directory for retrieval_<dir>.csv and retrieval_<dir>.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CurveArgs {
    #[arg(value_enum)]
    direction: Direction,
    #[command(flatten)]
    scores: ScoreArgs,
    /// Number of evenly spaced fractions.
    #[arg(long, default_value_t = 20)]
    steps: usize,
    /// Directory for curve_<dir>.csv and curve_<dir>.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(cmd: EvalCommand) -> Result<()> {
    match cmd {
        EvalCommand::Ppl(a) => ppl(a),
        EvalCommand::Bleu(a) => bleu_cmd(a),
        EvalCommand::Retrieval(a) => retrieval(a),
        EvalCommand::Curve(a) => curve(a),
    }
}

#[derive(Serialize)]
struct PplSummary {
    split: String,
    sentences: usize,
    words: usize,
    perplexity: f64,
}

fn ppl(args: PplArgs) -> Result<()> {
    let l = args.source.load()?;
    let perplexity = corpus_perplexity(&l.params, &l.examples, &l.features)?;
    let summary = PplSummary {
        split: args.source.split.clone(),
        sentences: l.examples.len(),
        words: l.examples.iter().map(CaptionedExample::predicted_len).sum(),
        perplexity,
    };
    let csv = format!(
        "split,sentences,words,perplexity\n{},{},{},{}\n",
        summary.split, summary.sentences, summary.words, summary.perplexity
    );
    write_metrics(args.out.as_deref(), "ppl", &csv, &summary)?;
    println!("perplexity {perplexity:.6} ({} sentences, {} words)", summary.sentences, summary.words);
    Ok(())
}

#[derive(Serialize)]
struct BleuSummary {
    mode: &'static str,
    b1: f64,
    b2: f64,
    b3: f64,
    precisions: Vec<f64>,
    brevity_penalty: f64,
    candidate_len: usize,
    reference_len: usize,
}

fn read_caption_file(path: &Path) -> Result<Vec<(String, Vec<String>)>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let records = read_captions(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?;
    Ok(records.into_iter().map(|r| (r.image_id, tokenize(&r.text))).collect())
}

fn bleu_from_files(cands: &Path, refs: &Path, mode: BleuMode) -> Result<BleuScore> {
    let mut references: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
    for (id, toks) in read_caption_file(refs)? {
        references.entry(id).or_default().push(toks);
    }
    let mut seen = BTreeSet::new();
    let (mut c, mut r) = (Vec::new(), Vec::new());
    for (id, toks) in read_caption_file(cands)? {
        if !seen.insert(id.clone()) {
            bail!("{}: more than one candidate for `{id}`", cands.display());
        }
        let refs_for = references
            .get(&id)
            .ok_or_else(|| anyhow!("{}: no reference for candidate `{id}`", refs.display()))?;
        c.push(toks);
        r.push(refs_for.clone());
    }
    Ok(bleu(&c, &r, 3, mode)?)
}

fn bleu_cmd(args: BleuArgs) -> Result<()> {
    let mode = if args.order_only {
        BleuMode::OrderOnly
    } else {
        BleuMode::Cumulative
    };
    let score = match (&args.candidates, &args.references) {
        (Some(c), Some(r)) => bleu_from_files(c, r, mode)?,
        _ => {
            let l = args.source.load()?;
            let gen = GenerationConfig {
                max_length: args.max_len,
                ..GenerationConfig::default()
            };
            caption_bleu(&l.params, &l.examples, &l.features, &gen, args.length_matched, mode)?.0
        }
    };
    let summary = BleuSummary {
        mode: match mode {
            BleuMode::Cumulative => "cumulative",
            BleuMode::OrderOnly => "order-only",
        },
        b1: score.b1(),
        b2: score.b2(),
        b3: score.b3(),
        precisions: score.precisions.clone(),
        brevity_penalty: score.brevity_penalty,
        candidate_len: score.candidate_len,
        reference_len: score.reference_len,
    };
    let csv = format!("b1,b2,b3\n{},{},{}\n", summary.b1, summary.b2, summary.b3);
    write_metrics(args.out.as_deref(), "bleu", &csv, &summary)?;
    println!("B-1 {:.4} B-2 {:.4} B-3 {:.4}", summary.b1, summary.b2, summary.b3);
    Ok(())
}

fn parse_flag(s: &str) -> Option<bool> {
    match s {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

/// Reads a score file into queries ordered by query id. Candidate ids are
/// numbered in lexicographic order so that ties break by id.
fn read_score_file(path: &Path) -> Result<Vec<RankingQuery>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rows: BTreeMap<String, Vec<(String, f64, bool)>> = BTreeMap::new();
    let mut candidates = BTreeSet::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() || (n == 0 && line.starts_with("query_id")) {
            continue;
        }
        let bad = |what: &str| anyhow!("{}:{}: {what}", path.display(), n + 1);
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(bad("expected 4 tab-separated fields"));
        }
        let score: f64 = fields[2].trim().parse().map_err(|_| bad("score is not a number"))?;
        let gt = parse_flag(fields[3].trim()).ok_or_else(|| bad("is_gt must be 0 or 1"))?;
        candidates.insert(fields[1].to_string());
        rows.entry(fields[0].to_string())
            .or_default()
            .push((fields[1].to_string(), score, gt));
    }
    if rows.is_empty() {
        bail!("{}: no scores", path.display());
    }
    let index: BTreeMap<String, usize> = candidates.into_iter().enumerate().map(|(i, c)| (c, i)).collect();
    Ok(rows
        .into_values()
        .map(|r| RankingQuery {
            scores: r.iter().map(|(c, s, _)| (index[c], *s)).collect(),
            relevant: r.iter().filter(|x| x.2).map(|(c, _, _)| index[c]).collect(),
        })
        .collect())
}

fn build_queries(args: &ScoreArgs, direction: Direction) -> Result<Vec<RankingQuery>> {
    if let Some(path) = &args.scores {
        return read_score_file(path);
    }
    let l = args.source.load()?;
    match direction {
        Direction::T2i => Ok(text_to_image_queries(&l.params, &l.examples, &l.features)?.queries),
        Direction::I2t => {
            let pool: Vec<&str> = if l.train_images.is_empty() {
                l.features.ids().collect()
            } else {
                l.train_images.iter().map(String::as_str).collect()
            };
            let ids = sample_norm_images(&pool, args.norm_images, &mut Rng::new(args.norm_seed));
            let norm: Vec<&DenseVector> = ids.iter().map(|id| l.features.get(id)).collect::<Result<_, _>>()?;
            Ok(image_to_text_queries(&l.params, &l.examples, &l.features, &norm, args.shortlist)?.queries)
        }
    }
}

#[derive(Serialize)]
struct RetrievalSummary {
    direction: &'static str,
    queries: usize,
    recall_at: BTreeMap<String, f64>,
    med_r: usize,
    ranks: Vec<usize>,
}

fn retrieval(args: RetrievalArgs) -> Result<()> {
    let queries = build_queries(&args.scores, args.direction)?;
    let m = retrieval_eval(&queries, &DEFAULT_KS)?;
    let summary = RetrievalSummary {
        direction: args.direction.name(),
        queries: queries.len(),
        recall_at: m.recall_at.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        med_r: m.median_rank,
        ranks: m.ranks.clone(),
    };
    let r = |k| m.r_at(k).unwrap_or(0.0);
    let csv = format!(
        "direction,queries,r@1,r@5,r@10,med_r\n{},{},{},{},{},{}\n",
        summary.direction,
        summary.queries,
        r(1),
        r(5),
        r(10),
        summary.med_r
    );
    write_metrics(args.out.as_deref(), &format!("retrieval_{}", summary.direction), &csv, &summary)?;
    println!(
        "{}: R@1 {:.2} R@5 {:.2} R@10 {:.2} Med r {} ({} queries)",
        summary.direction,
        r(1),
        r(5),
        r(10),
        summary.med_r,
        summary.queries
    );
    Ok(())
}

#[derive(Serialize)]
struct CurveSummary {
    direction: &'static str,
    queries: usize,
    points: Vec<(f64, f64)>,
}

fn curve(args: CurveArgs) -> Result<()> {
    if args.steps == 0 {
        bail!("--steps must be at least 1");
    }
    let queries = build_queries(&args.scores, args.direction)?;
    let c = recall_curve(&queries, &default_fractions(args.steps))?;
    let mut csv = String::from("fraction,mean_matches\n");
    for (f, m) in &c.points {
        writeln!(csv, "{f},{m}")?;
    }
    let summary = CurveSummary {
        direction: args.direction.name(),
        queries: queries.len(),
        points: c.points.clone(),
    };
    write_metrics(args.out.as_deref(), &format!("curve_{}", summary.direction), &csv, &summary)?;
    print!("{csv}");
    Ok(())
}
