//! Caption generation, sentence scoring and the two retrieval directions.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::{ImageFeatureStore, END_INDEX};
use crate::error::{Error, Result};
use crate::model::{sentence_loss, Decoder, ModelParams};
use crate::numerics::{DenseVector, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GenerationMode {
    /// Most probable word at each step; ties go to the lowest index.
    #[default]
    Greedy,
    /// Draw each word from the predicted distribution.
    Sample,
}

impl FromStr for GenerationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Self::Greedy),
            "sample" => Ok(Self::Sample),
            other => Err(Error::InvalidConfig(format!("unknown generation mode `{other}`"))),
        }
    }
}

impl fmt::Display for GenerationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Greedy => "greedy",
            Self::Sample => "sample",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub mode: GenerationMode,
    /// Cap on generated words (the prefix does not count).
    pub max_length: usize,
    /// Words fed after START before generation begins; echoed at the start
    /// of the output.
    pub prefix: Vec<usize>,
    pub seed: u64,
    /// Generate exactly this many words, never choosing END before then.
    /// Overrides `max_length`.
    pub exact_length: Option<usize>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            mode: GenerationMode::Greedy,
            max_length: 50,
            prefix: Vec::new(),
            seed: 0,
            exact_length: None,
        }
    }
}

/// Index of the largest entry, lowest index on ties.
fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Generates a caption for `image`. The result starts with the prefix and
/// excludes START and END.
pub fn generate(params: &ModelParams, image: &DenseVector, config: &GenerationConfig) -> Result<Vec<usize>> {
    if config.max_length == 0 && config.exact_length.is_none() {
        return Err(Error::InvalidConfig("max_length must be at least 1".into()));
    }
    let mut decoder = Decoder::new(params, image)?;
    let mut probs = decoder.feed(crate::corpus::START_INDEX)?;
    for &w in &config.prefix {
        probs = decoder.feed(w)?;
    }
    let limit = config.exact_length.unwrap_or(config.max_length);
    let mut rng = Rng::new(config.seed);
    let mut out = config.prefix.clone();
    for produced in 0..limit {
        if config.exact_length.is_some() {
            probs[END_INDEX] = if config.mode == GenerationMode::Greedy {
                f64::NEG_INFINITY
            } else {
                0.0
            };
        }
        let next = match config.mode {
            GenerationMode::Greedy => argmax(&probs),
            GenerationMode::Sample => rng.categorical(&probs),
        };
        if next == END_INDEX {
            break;
        }
        out.push(next);
        if produced + 1 < limit {
            probs = decoder.feed(next)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentenceScore {
    /// `log2 P(w_1..w_L, END | I)`.
    pub log2prob: f64,
    pub ppl: f64,
    /// Predicted positions, including END.
    pub len: usize,
}

/// Log-probability and perplexity of a caption under `image`; they satisfy
/// `log2prob = -len · log2(ppl)`.
pub fn sentence_log2prob(params: &ModelParams, tokens: &[usize], image: &DenseVector) -> Result<SentenceScore> {
    let log2prob = -sentence_loss(params, tokens, image)? / std::f64::consts::LN_2;
    let len = tokens.len() + 1;
    Ok(SentenceScore {
        log2prob,
        ppl: (-log2prob / len as f64).exp2(),
        len,
    })
}

/// `log2 Σ 2^x_i`, stable for large negative inputs.
pub fn log2_sum_exp2(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp2()).sum::<f64>().log2()
}

/// `log2((1/K) Σ_k P(w | I'_k))`, the image-marginal sentence probability.
pub fn log2_marginal(params: &ModelParams, tokens: &[usize], norm_images: &[&DenseVector]) -> Result<f64> {
    if norm_images.is_empty() {
        return Err(Error::EmptyInput("normalization images"));
    }
    let logs: Vec<f64> = norm_images
        .iter()
        .map(|img| sentence_log2prob(params, tokens, img).map(|s| s.log2prob))
        .collect::<Result<_>>()?;
    Ok(log2_sum_exp2(&logs) - (logs.len() as f64).log2())
}

/// Draws `k` distinct ids (all of them if fewer exist), returned sorted.
pub fn sample_norm_images(ids: &[&str], k: usize, rng: &mut Rng) -> Vec<String> {
    let mut pool: Vec<&str> = ids.to_vec();
    pool.sort_unstable();
    pool.dedup();
    rng.shuffle(&mut pool);
    pool.truncate(k);
    pool.sort_unstable();
    pool.into_iter().map(String::from).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrievalDirection {
    ImageToText,
    TextToImage,
}

/// Candidates best-first. For text-to-image the score is the perplexity
/// (ascending); for image-to-text it is the normalized log-probability
/// (descending). Equal scores are ordered by candidate id.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult<K> {
    pub direction: RetrievalDirection,
    pub ranked: Vec<(K, f64)>,
}

impl<K: Ord> RetrievalResult<K> {
    pub fn new(direction: RetrievalDirection, mut scores: Vec<(K, f64)>) -> Self {
        match direction {
            RetrievalDirection::TextToImage => {
                scores.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
            }
            RetrievalDirection::ImageToText => {
                scores.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            }
        }
        Self { direction, ranked: scores }
    }

    /// 1-based position of `id`.
    pub fn rank_of(&self, id: &K) -> Option<usize> {
        self.ranked.iter().position(|(k, _)| k == id).map(|p| p + 1)
    }

    pub fn ids(&self) -> impl Iterator<Item = &K> {
        self.ranked.iter().map(|(k, _)| k)
    }
}

/// Ranks every image in `store` by the perplexity of `query` under it.
pub fn retrieve_images(params: &ModelParams, query: &[usize], store: &ImageFeatureStore) -> Result<RetrievalResult<String>> {
    if store.is_empty() {
        return Err(Error::EmptyInput("image store"));
    }
    let entries: Vec<(&str, &DenseVector)> = store.iter().collect();
    let scores = entries
        .par_iter()
        .map(|(id, img)| Ok((id.to_string(), sentence_log2prob(params, query, img)?.ppl)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RetrievalResult::new(RetrievalDirection::TextToImage, scores))
}

/// Ranks `candidates` (by position) for an image using
/// `log2 P(w|I) - log2((1/K) Σ_k P(w|I'_k))`.
pub fn retrieve_sentences(
    params: &ModelParams,
    image: &DenseVector,
    candidates: &[Vec<usize>],
    norm_images: &[&DenseVector],
) -> Result<RetrievalResult<usize>> {
    let marginals = sentence_marginals(params, candidates, norm_images)?;
    retrieve_sentences_with_marginals(params, image, candidates, &marginals)
}

/// The marginal term for each candidate; it does not depend on the query,
/// so callers ranking many images can compute it once.
pub fn sentence_marginals(params: &ModelParams, candidates: &[Vec<usize>], norm_images: &[&DenseVector]) -> Result<Vec<f64>> {
    if norm_images.is_empty() {
        return Err(Error::EmptyInput("normalization images"));
    }
    candidates
        .par_iter()
        .map(|c| log2_marginal(params, c, norm_images))
        .collect()
}

pub fn retrieve_sentences_with_marginals(
    params: &ModelParams,
    image: &DenseVector,
    candidates: &[Vec<usize>],
    marginals: &[f64],
) -> Result<RetrievalResult<usize>> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("candidate sentences"));
    }
    crate::error::check_dim("sentence marginals", candidates.len(), marginals.len())?;
    let scores = candidates
        .par_iter()
        .zip(marginals.par_iter())
        .enumerate()
        .map(|(i, (c, m))| Ok((i, sentence_log2prob(params, c, image)?.log2prob - m)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RetrievalResult::new(RetrievalDirection::ImageToText, scores))
}
