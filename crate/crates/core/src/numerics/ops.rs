//! Checked elementwise functions on plain tensors.
//!
//! Softmax normalizes over the last axis, so a matrix is treated as a stack
//! of rows. Every function rejects non-finite input.

use super::tensor::Tensor;
use crate::error::Result;

pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn leaky_relu_scalar(x: f64, alpha: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        alpha * x
    }
}

pub(crate) fn softmax_slice(x: &[f64], out: &mut [f64]) {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, v) in out.iter_mut().zip(x) {
        *o = (v - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

fn map(x: &Tensor, op: &'static str, f: impl Fn(f64) -> f64) -> Result<Tensor> {
    x.check_finite(op)?;
    let data = x.data().iter().map(|&v| f(v)).collect();
    Tensor::new(x.shape().to_vec(), data)
}

pub fn tanh(x: &Tensor) -> Result<Tensor> {
    map(x, "tanh", f64::tanh)
}

pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    map(x, "sigmoid", sigmoid_scalar)
}

pub fn leaky_relu(x: &Tensor, alpha: f64) -> Result<Tensor> {
    map(x, "leaky_relu", |v| leaky_relu_scalar(v, alpha))
}

pub fn softmax(x: &Tensor) -> Result<Tensor> {
    x.check_finite("softmax")?;
    let cols = x.cols();
    let mut out = vec![0.0; x.len()];
    if cols > 0 {
        for (src, dst) in x.data().chunks(cols).zip(out.chunks_mut(cols)) {
            softmax_slice(src, dst);
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}
