//! Forward pass over one sentence.
//!
//! Multimodal step, given input word `w` and previous state `r(t-1)`:
//!
//! ```text
//! e1(t) = E1[w]
//! e2(t) = relu(E2 e1(t) + b_e2)
//! r(t)  = relu(U_r r(t-1) + W_in e2(t) + b_r)
//! m(t)  = 1.7159 tanh(2/3 (V_w e2(t) + V_r r(t) + V_I I + b_m))
//! y(t)  = softmax(W_out m(t) + b_out)
//! ```
//!
//! Baseline step:
//!
//! ```text
//! r(t) = sigmoid(U_w[w] + U_r r(t-1) + b_r)
//! y(t) = softmax(V r(t) + b_out)
//! ```

use super::params::{ModelParams, MultimodalWeights, SimpleRnnWeights, Weights};
use crate::corpus::START_INDEX;
use crate::error::{check_dim, Error, Result};
use crate::numerics::{scaled_tanh_scalar, sigmoid_scalar, softmax_in_place, DenseVector};

/// Activations of one time step. Fields that a variant does not have are
/// left empty.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub input: usize,
    pub embed1: DenseVector,
    pub embed2_pre: DenseVector,
    /// Final word representation `w(t)`.
    pub embed2: DenseVector,
    pub recurrent_pre: DenseVector,
    pub recurrent: DenseVector,
    pub multimodal_pre: DenseVector,
    pub multimodal: DenseVector,
    /// Next-word distribution `y(t)`.
    pub probs: DenseVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `r(0)`, always zero.
    pub initial_state: DenseVector,
    pub steps: Vec<StepTrace>,
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Recurrent state feeding step `t`.
    pub fn state_before(&self, t: usize) -> &DenseVector {
        if t == 0 {
            &self.initial_state
        } else {
            &self.steps[t - 1].recurrent
        }
    }
}

/// One step of the network. `image` is ignored by the baseline.
pub fn forward_step(
    params: &ModelParams,
    word: usize,
    prev_state: &DenseVector,
    image: &DenseVector,
) -> Result<StepTrace> {
    let cfg = params.config();
    check_word(params, word)?;
    check_dim("recurrent state", cfg.recurrent_dim, prev_state.dim())?;
    let image_term = image_term(params, image)?;
    Ok(step(params, word, prev_state, &image_term))
}

/// Run the network over START followed by `tokens`; step `t` consumes input
/// `t` and predicts the next token (the last step predicts END).
pub fn forward_sentence(params: &ModelParams, tokens: &[usize], image: &DenseVector) -> Result<ForwardTrace> {
    let mut inputs = Vec::with_capacity(tokens.len() + 1);
    inputs.push(START_INDEX);
    inputs.extend_from_slice(tokens);
    forward_inputs(params, &inputs, image)
}

/// Run the network over an explicit input sequence.
pub fn forward_inputs(params: &ModelParams, inputs: &[usize], image: &DenseVector) -> Result<ForwardTrace> {
    for &w in inputs {
        check_word(params, w)?;
    }
    let image_term = image_term(params, image)?;
    let mut state = Decoder::with_image_term(params, image_term);
    let mut steps = Vec::with_capacity(inputs.len());
    for &w in inputs {
        steps.push(state.advance(w));
    }
    Ok(ForwardTrace {
        initial_state: DenseVector::zeros(params.config().recurrent_dim),
        steps,
    })
}

/// Incremental decoder used for generation: holds the recurrent state and
/// the per-sentence image projection.
#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    params: &'a ModelParams,
    image_term: Vec<f64>,
    state: DenseVector,
}

impl<'a> Decoder<'a> {
    pub fn new(params: &'a ModelParams, image: &DenseVector) -> Result<Self> {
        Ok(Self::with_image_term(params, image_term(params, image)?))
    }

    fn with_image_term(params: &'a ModelParams, image_term: Vec<f64>) -> Self {
        Self {
            params,
            image_term,
            state: DenseVector::zeros(params.config().recurrent_dim),
        }
    }

    /// Feed one word; returns the full step trace (its `probs` is the
    /// distribution over the following word).
    pub fn advance(&mut self, word: usize) -> StepTrace {
        let s = step(self.params, word, &self.state, &self.image_term);
        self.state = s.recurrent.clone();
        s
    }

    pub fn feed(&mut self, word: usize) -> Result<DenseVector> {
        check_word(self.params, word)?;
        Ok(self.advance(word).probs)
    }
}

fn check_word(params: &ModelParams, word: usize) -> Result<()> {
    let m = params.config().vocab_size;
    if word >= m {
        return Err(Error::IndexOutOfRange {
            context: "vocabulary",
            index: word,
            len: m,
        });
    }
    Ok(())
}

/// `V_I I + b_m`, constant over a sentence. Empty for the baseline.
fn image_term(params: &ModelParams, image: &DenseVector) -> Result<Vec<f64>> {
    match params.weights() {
        Weights::Multimodal(w) => {
            check_dim("image feature", params.config().image_dim, image.dim())?;
            let mut out = w.mm_bias.as_slice().to_vec();
            w.mm_image.mul_vec_add(image, &mut out);
            Ok(out)
        }
        Weights::SimpleRnn(_) => Ok(Vec::new()),
    }
}

fn step(params: &ModelParams, word: usize, prev: &DenseVector, image_term: &[f64]) -> StepTrace {
    match params.weights() {
        Weights::Multimodal(w) => multimodal_step(w, word, prev, image_term),
        Weights::SimpleRnn(w) => simple_step(w, word, prev),
    }
}

fn multimodal_step(w: &MultimodalWeights, word: usize, prev: &[f64], image_term: &[f64]) -> StepTrace {
    let embed1 = w.embed1.row(word).to_vec();

    let mut embed2_pre = w.embed2_bias.as_slice().to_vec();
    w.embed2.mul_vec_add(&embed1, &mut embed2_pre);
    let embed2: Vec<f64> = embed2_pre.iter().map(|&x| x.max(0.0)).collect();

    let mut recurrent_pre = w.recurrent_bias.as_slice().to_vec();
    w.recurrent.mul_vec_add(prev, &mut recurrent_pre);
    w.word_to_recurrent.mul_vec_add(&embed2, &mut recurrent_pre);
    let recurrent: Vec<f64> = recurrent_pre.iter().map(|&x| x.max(0.0)).collect();

    let mut multimodal_pre = image_term.to_vec();
    w.mm_word.mul_vec_add(&embed2, &mut multimodal_pre);
    w.mm_recurrent.mul_vec_add(&recurrent, &mut multimodal_pre);
    let multimodal: Vec<f64> = multimodal_pre.iter().map(|&x| scaled_tanh_scalar(x)).collect();

    let mut probs = w.output_bias.as_slice().to_vec();
    w.output.mul_vec_add(&multimodal, &mut probs);
    softmax_in_place(&mut probs);

    StepTrace {
        input: word,
        embed1: embed1.into(),
        embed2_pre: embed2_pre.into(),
        embed2: embed2.into(),
        recurrent_pre: recurrent_pre.into(),
        recurrent: recurrent.into(),
        multimodal_pre: multimodal_pre.into(),
        multimodal: multimodal.into(),
        probs: probs.into(),
    }
}

fn simple_step(w: &SimpleRnnWeights, word: usize, prev: &[f64]) -> StepTrace {
    let mut recurrent_pre = w.recurrent_bias.as_slice().to_vec();
    for (r, x) in recurrent_pre.iter_mut().zip(w.word_input.row(word)) {
        *r += x;
    }
    w.recurrent.mul_vec_add(prev, &mut recurrent_pre);
    let recurrent: Vec<f64> = recurrent_pre.iter().map(|&x| sigmoid_scalar(x)).collect();

    let mut probs = w.output_bias.as_slice().to_vec();
    w.output.mul_vec_add(&recurrent, &mut probs);
    softmax_in_place(&mut probs);

    StepTrace {
        input: word,
        embed1: DenseVector::default(),
        embed2_pre: DenseVector::default(),
        embed2: DenseVector::default(),
        recurrent_pre: recurrent_pre.into(),
        recurrent: recurrent.into(),
        multimodal_pre: DenseVector::default(),
        multimodal: DenseVector::default(),
        probs: probs.into(),
    }
}
