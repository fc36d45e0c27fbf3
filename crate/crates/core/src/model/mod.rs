//! Network definitions: parameters, forward pass, backpropagation through
//! time and checkpoint I/O for the multimodal RNN and its image-free
//! baseline.

mod backward;
mod checkpoint;
mod config;
mod forward;
mod params;

pub use backward::{accumulate_backward, accumulate_sentence, backward_sentence, sentence_gradients};
pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{ModelConfig, Variant};
pub use forward::{forward_inputs, forward_sentence, forward_step, Decoder, ForwardTrace, StepTrace};
pub use params::{
    Block, BlockKind, BlockMut, Gradients, ModelParams, MultimodalWeights, SimpleRnnWeights, Weights,
};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

/// Natural-log loss `-Σ ln P(target)` of the framed sentence.
pub fn sentence_loss(params: &ModelParams, tokens: &[usize], image: &crate::numerics::DenseVector) -> Result<f64> {
    let trace = forward_sentence(params, tokens, image)?;
    let mut loss = 0.0;
    for (t, step) in trace.steps.iter().enumerate() {
        let target = tokens.get(t).copied().unwrap_or(crate::corpus::END_INDEX);
        loss -= step.probs[target].ln();
    }
    Ok(loss)
}

/// The `k` words whose input representations are closest (Euclidean) to
/// `token`'s, nearest first. The query itself is excluded; ties go to the
/// lower index.
pub fn nearest_words(params: &ModelParams, vocab: &Vocabulary, token: &str, k: usize) -> Result<Vec<(String, f64)>> {
    let query = vocab
        .index_of(token)
        .ok_or_else(|| Error::UnknownToken(token.to_string()))?;
    let qv = params.word_vector(query)?;
    let n = params.config().vocab_size.min(vocab.len());
    let mut dists = Vec::with_capacity(n);
    for i in (0..n).filter(|&i| i != query) {
        let d: f64 = params
            .word_vector(i)?
            .iter()
            .zip(qv)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        dists.push((d.sqrt(), i));
    }
    dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(dists
        .into_iter()
        .take(k)
        .map(|(d, i)| (vocab.token(i).unwrap_or_default().to_string(), d))
        .collect())
}
