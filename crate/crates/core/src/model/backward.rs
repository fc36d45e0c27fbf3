//! Backpropagation through time over a full sentence (no truncation).
//!
//! The loss is `-Σ_t ln y(t)[target_t]`. Gradients flow from every output
//! back through the recurrent chain to `r(0)`.

use super::forward::{forward_sentence, ForwardTrace};
use super::params::{Gradients, ModelParams, MultimodalWeights, SimpleRnnWeights, Weights};
use crate::corpus::END_INDEX;
use crate::error::{check_dim, Error, Result};
use crate::numerics::{axpy, scaled_tanh_grad_from_output, DenseVector};

/// Gradients and summed natural-log loss for one sentence.
pub fn backward_sentence(
    params: &ModelParams,
    trace: &ForwardTrace,
    targets: &[usize],
    image: &DenseVector,
) -> Result<(Gradients, f64)> {
    let mut grads = Gradients::zeros_like(params);
    let loss = accumulate_backward(params, trace, targets, image, &mut grads)?;
    Ok((grads, loss))
}

/// Forward and backward for the framed sentence `START tokens → tokens END`.
pub fn sentence_gradients(
    params: &ModelParams,
    tokens: &[usize],
    image: &DenseVector,
) -> Result<(Gradients, f64)> {
    let mut grads = Gradients::zeros_like(params);
    let loss = accumulate_sentence(params, tokens, image, &mut grads)?;
    Ok((grads, loss))
}

/// Like [`sentence_gradients`] but adds into an existing accumulator.
pub fn accumulate_sentence(
    params: &ModelParams,
    tokens: &[usize],
    image: &DenseVector,
    grads: &mut Gradients,
) -> Result<f64> {
    let trace = forward_sentence(params, tokens, image)?;
    let mut targets = Vec::with_capacity(tokens.len() + 1);
    targets.extend_from_slice(tokens);
    targets.push(END_INDEX);
    accumulate_backward(params, &trace, &targets, image, grads)
}

/// Adds this sentence's gradients into `grads` and returns its loss.
pub fn accumulate_backward(
    params: &ModelParams,
    trace: &ForwardTrace,
    targets: &[usize],
    image: &DenseVector,
    grads: &mut Gradients,
) -> Result<f64> {
    check_dim("targets", trace.len(), targets.len())?;
    let m = params.config().vocab_size;
    if let Some(&bad) = targets.iter().find(|&&t| t >= m) {
        return Err(Error::IndexOutOfRange {
            context: "vocabulary",
            index: bad,
            len: m,
        });
    }
    if grads.as_params().config() != params.config() {
        return Err(Error::InvalidConfig(
            "gradient accumulator does not match the model".into(),
        ));
    }
    match (params.weights(), grads.weights_mut()) {
        (Weights::Multimodal(w), Weights::Multimodal(g)) => {
            check_dim("image feature", params.config().image_dim, image.dim())?;
            Ok(multimodal_backward(w, g, trace, targets, image))
        }
        (Weights::SimpleRnn(w), Weights::SimpleRnn(g)) => Ok(simple_backward(w, g, trace, targets)),
        _ => unreachable!("configs compared equal"),
    }
}

/// `dlogits = y - onehot(target)`; returns `-ln y[target]`.
fn output_delta(probs: &[f64], target: usize, out: &mut Vec<f64>) -> f64 {
    out.clear();
    out.extend_from_slice(probs);
    out[target] -= 1.0;
    -probs[target].ln()
}

fn multimodal_backward(
    w: &MultimodalWeights,
    g: &mut MultimodalWeights,
    trace: &ForwardTrace,
    targets: &[usize],
    image: &[f64],
) -> f64 {
    let dm_dim = w.mm_bias.dim();
    let dr_dim = w.recurrent_bias.dim();
    let de_dim = w.embed2_bias.dim();
    let de1_dim = w.embed1.cols();

    let mut loss = 0.0;
    let mut dlogits = Vec::new();
    // dL/dr(t) arriving from step t+1 through U_r.
    let mut dr_next = vec![0.0; dr_dim];
    // Σ_t dL/da_m(t): V_I multiplies the same image at every step.
    let mut da_image = vec![0.0; dm_dim];

    for t in (0..trace.len()).rev() {
        let s = &trace.steps[t];
        loss += output_delta(&s.probs, targets[t], &mut dlogits);

        g.output.add_outer(&dlogits, &s.multimodal);
        axpy(1.0, &dlogits, &mut g.output_bias);

        let mut da_m = vec![0.0; dm_dim];
        w.output.mul_t_vec_add(&dlogits, &mut da_m);
        for (d, &y) in da_m.iter_mut().zip(s.multimodal.iter()) {
            *d *= scaled_tanh_grad_from_output(y);
        }
        g.mm_word.add_outer(&da_m, &s.embed2);
        g.mm_recurrent.add_outer(&da_m, &s.recurrent);
        axpy(1.0, &da_m, &mut g.mm_bias);
        axpy(1.0, &da_m, &mut da_image);

        let mut de2 = vec![0.0; de_dim];
        w.mm_word.mul_t_vec_add(&da_m, &mut de2);

        let mut da_r = std::mem::replace(&mut dr_next, vec![0.0; dr_dim]);
        w.mm_recurrent.mul_t_vec_add(&da_m, &mut da_r);
        for (d, &pre) in da_r.iter_mut().zip(s.recurrent_pre.iter()) {
            if pre <= 0.0 {
                *d = 0.0;
            }
        }
        g.recurrent.add_outer(&da_r, trace.state_before(t));
        g.word_to_recurrent.add_outer(&da_r, &s.embed2);
        axpy(1.0, &da_r, &mut g.recurrent_bias);
        w.word_to_recurrent.mul_t_vec_add(&da_r, &mut de2);
        w.recurrent.mul_t_vec_add(&da_r, &mut dr_next);

        for (d, &pre) in de2.iter_mut().zip(s.embed2_pre.iter()) {
            if pre <= 0.0 {
                *d = 0.0;
            }
        }
        g.embed2.add_outer(&de2, &s.embed1);
        axpy(1.0, &de2, &mut g.embed2_bias);
        let mut de1 = vec![0.0; de1_dim];
        w.embed2.mul_t_vec_add(&de2, &mut de1);
        axpy(1.0, &de1, g.embed1.row_mut(s.input));
    }
    g.mm_image.add_outer(&da_image, image);
    loss
}

fn simple_backward(
    w: &SimpleRnnWeights,
    g: &mut SimpleRnnWeights,
    trace: &ForwardTrace,
    targets: &[usize],
) -> f64 {
    let dr_dim = w.recurrent_bias.dim();
    let mut loss = 0.0;
    let mut dlogits = Vec::new();
    let mut dr_next = vec![0.0; dr_dim];

    for t in (0..trace.len()).rev() {
        let s = &trace.steps[t];
        loss += output_delta(&s.probs, targets[t], &mut dlogits);

        g.output.add_outer(&dlogits, &s.recurrent);
        axpy(1.0, &dlogits, &mut g.output_bias);

        let mut da = std::mem::replace(&mut dr_next, vec![0.0; dr_dim]);
        w.output.mul_t_vec_add(&dlogits, &mut da);
        for (d, &r) in da.iter_mut().zip(s.recurrent.iter()) {
            *d *= r * (1.0 - r);
        }
        g.recurrent.add_outer(&da, trace.state_before(t));
        axpy(1.0, &da, g.word_input.row_mut(s.input));
        axpy(1.0, &da, &mut g.recurrent_bias);
        w.recurrent.mul_t_vec_add(&da, &mut dr_next);
    }
    loss
}
