//! Caption and retrieval metrics: corpus perplexity, BLEU, R@K, median
//! rank, recall curves and the nearest-neighbour shortlist.

mod bleu;
mod ranking;

use std::collections::BTreeMap;

use rayon::prelude::*;

pub use bleu::{bleu, BleuMode, BleuScore};
pub use ranking::{
    default_fractions, recall_curve, retrieval_eval, retrieved_count, shortlist, RankingQuery, RecallCurve,
    RetrievalMetrics, DEFAULT_KS,
};

use crate::corpus::{group_by_image, CaptionedExample, ImageFeatureStore};
use crate::error::{Error, Result};
use crate::inference::{generate, sentence_log2prob, sentence_marginals, GenerationConfig};
use crate::model::ModelParams;
use crate::numerics::DenseVector;
use crate::training::corpus_log2_loss;

/// Word-weighted perplexity `2^(Σ_i L_i log2 PPL_i / Σ_i L_i)`.
pub fn corpus_perplexity(params: &ModelParams, examples: &[CaptionedExample], features: &ImageFeatureStore) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    let (bits, words) = corpus_log2_loss(params, examples, features)?;
    Ok((bits / words as f64).exp2())
}

/// `log2 P(caption_j | image_i)` for every pair.
pub fn log2prob_matrix(params: &ModelParams, images: &[&DenseVector], captions: &[Vec<usize>]) -> Result<Vec<Vec<f64>>> {
    images
        .par_iter()
        .map(|img| {
            captions
                .iter()
                .map(|c| sentence_log2prob(params, c, img).map(|s| s.log2prob))
                .collect()
        })
        .collect()
}

/// Retrieval queries over a set of captioned images.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalSetup {
    /// Distinct image ids, sorted; image candidate `i` is `image_ids[i]`.
    pub image_ids: Vec<String>,
    /// Sentence candidate `j` is `examples[j]`.
    pub queries: Vec<RankingQuery>,
}

/// One query per caption; candidates are the images, scored by negative
/// perplexity so that higher is better.
pub fn text_to_image_queries(
    params: &ModelParams,
    examples: &[CaptionedExample],
    features: &ImageFeatureStore,
) -> Result<RetrievalSetup> {
    let (image_ids, _) = group_by_image(examples);
    let images: Vec<&DenseVector> = image_ids.iter().map(|id| features.get(id)).collect::<Result<_>>()?;
    let captions: Vec<Vec<usize>> = examples.iter().map(|e| e.tokens.clone()).collect();
    let logp = log2prob_matrix(params, &images, &captions)?;
    let index: BTreeMap<&str, usize> = image_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let queries = examples
        .iter()
        .enumerate()
        .map(|(j, e)| {
            let len = (e.tokens.len() + 1) as f64;
            let scores = (0..images.len()).map(|i| (i, -(-logp[i][j] / len).exp2())).collect();
            RankingQuery {
                scores,
                relevant: [index[e.image_id.as_str()]].into(),
            }
        })
        .collect();
    Ok(RetrievalSetup { image_ids, queries })
}

/// One query per image; candidates are all captions (or, with a
/// shortlist, the captions of the `shortlist` images nearest to the query
/// image in feature space), scored by normalized log-probability.
pub fn image_to_text_queries(
    params: &ModelParams,
    examples: &[CaptionedExample],
    features: &ImageFeatureStore,
    norm_images: &[&DenseVector],
    shortlist_size: Option<usize>,
) -> Result<RetrievalSetup> {
    let (image_ids, groups) = group_by_image(examples);
    let images: Vec<&DenseVector> = image_ids.iter().map(|id| features.get(id)).collect::<Result<_>>()?;
    let captions: Vec<Vec<usize>> = examples.iter().map(|e| e.tokens.clone()).collect();
    let marginals = sentence_marginals(params, &captions, norm_images)?;
    let logp = log2prob_matrix(params, &images, &captions)?;

    let allowed: Option<Vec<Vec<String>>> = match shortlist_size {
        Some(size) => {
            let store = features.subset(image_ids.iter().map(String::as_str))?;
            Some(shortlist(&images, &store, size)?)
        }
        None => None,
    };
    let queries = (0..images.len())
        .map(|i| {
            let scores = (0..captions.len())
                .filter(|&j| match &allowed {
                    Some(lists) => lists[i].iter().any(|id| *id == examples[j].image_id),
                    None => true,
                })
                .map(|j| (j, logp[i][j] - marginals[j]))
                .collect();
            RankingQuery {
                scores,
                relevant: groups[i].iter().copied().collect(),
            }
        })
        .collect();
    Ok(RetrievalSetup { image_ids, queries })
}

/// Greedy captions for each distinct image and BLEU against that image's
/// captions. With `length_matched`, each caption is generated with exactly
/// as many words as the image's first reference.
pub fn caption_bleu(
    params: &ModelParams,
    examples: &[CaptionedExample],
    features: &ImageFeatureStore,
    gen: &GenerationConfig,
    length_matched: bool,
    mode: BleuMode,
) -> Result<(BleuScore, Vec<(String, Vec<usize>)>)> {
    let (image_ids, groups) = group_by_image(examples);
    let outputs: Vec<(String, Vec<usize>)> = image_ids
        .par_iter()
        .zip(groups.par_iter())
        .map(|(id, group)| {
            let mut cfg = gen.clone();
            if length_matched {
                cfg.exact_length = Some(examples[group[0]].tokens.len());
            }
            Ok((id.clone(), generate(params, features.get(id)?, &cfg)?))
        })
        .collect::<Result<_>>()?;
    let candidates: Vec<Vec<usize>> = outputs.iter().map(|(_, c)| c.clone()).collect();
    let references: Vec<Vec<Vec<usize>>> = groups
        .iter()
        .map(|g| g.iter().map(|&j| examples[j].tokens.clone()).collect())
        .collect();
    Ok((bleu(&candidates, &references, 3, mode)?, outputs))
}
