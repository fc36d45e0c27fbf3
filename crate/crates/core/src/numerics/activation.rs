//! Elementwise activations and softmax.

use super::DenseVector;

/// Amplitude of the LeCun scaled hyperbolic tangent.
pub const SCALED_TANH_AMPLITUDE: f64 = 1.7159;
/// Input gain of the LeCun scaled hyperbolic tangent.
pub const SCALED_TANH_GAIN: f64 = 2.0 / 3.0;

pub fn relu(v: &DenseVector) -> DenseVector {
    v.iter().map(|&x| x.max(0.0)).collect()
}

/// `1.7159 · tanh(2x / 3)`, elementwise.
pub fn scaled_tanh(v: &DenseVector) -> DenseVector {
    v.iter().map(|&x| scaled_tanh_scalar(x)).collect()
}

pub fn sigmoid(v: &DenseVector) -> DenseVector {
    v.iter().map(|&x| sigmoid_scalar(x)).collect()
}

pub fn softmax(logits: &DenseVector) -> DenseVector {
    let mut out = logits.clone();
    softmax_in_place(&mut out);
    out
}

#[inline]
pub fn scaled_tanh_scalar(x: f64) -> f64 {
    SCALED_TANH_AMPLITUDE * (SCALED_TANH_GAIN * x).tanh()
}

/// Derivative of the scaled tanh expressed through its output `y`.
#[inline]
pub fn scaled_tanh_grad_from_output(y: f64) -> f64 {
    SCALED_TANH_GAIN * (SCALED_TANH_AMPLITUDE - y * y / SCALED_TANH_AMPLITUDE)
}

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Max-subtracted softmax over a slice, in place.
pub fn softmax_in_place(x: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let inv = 1.0 / sum;
    for v in x.iter_mut() {
        *v *= inv;
    }
}
