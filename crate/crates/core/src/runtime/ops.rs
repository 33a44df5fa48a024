//! Lightweight peripheral operators: ReLU, max pooling, batch-norm
//! folding, and classification.

use crate::error::{Error, Result};
use crate::runtime::quant::Tensor;

/// Elementwise max(x, 0).
pub fn relu(tensor: &Tensor) -> Tensor {
    Tensor {
        shape: tensor.shape,
        data: tensor.data.iter().map(|&x| x.max(0)).collect(),
    }
}

/// Window maximum with the given square window and stride. The window
/// must tile the input exactly (valid pooling).
pub fn maxpool(tensor: &Tensor, k: usize, stride: usize) -> Result<Tensor> {
    let (h, w, c) = tensor.shape;
    if k == 0 || stride == 0 || k > h || k > w {
        return Err(Error::ShapeMismatch(format!(
            "pool window {k} stride {stride} exceeds input {h}x{w}"
        )));
    }
    if !(h - k).is_multiple_of(stride) || !(w - k).is_multiple_of(stride) {
        return Err(Error::ShapeMismatch(format!(
            "pool window {k} stride {stride} does not tile {h}x{w}"
        )));
    }
    let oh = (h - k) / stride + 1;
    let ow = (w - k) / stride + 1;
    let mut out = Tensor::zeros((oh, ow, c));
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut best = i64::MIN;
                for dy in 0..k {
                    for dx in 0..k {
                        best = best.max(tensor.at(oy * stride + dy, ox * stride + dx, ch));
                    }
                }
                *out.at_mut(oy, ox, ch) = best;
            }
        }
    }
    Ok(out)
}

/// Batch-normalization parameters per output channel.
#[derive(Debug, Clone)]
pub struct BatchNormParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub epsilon: f64,
}

/// Folds batch normalization into the preceding layer's real-valued
/// weights ahead of quantization: w' = w * gamma / sqrt(var + eps),
/// bias' = beta - gamma * mean / sqrt(var + eps). Keeps the macro path
/// integer-only at inference time.
pub fn batchnorm_fold(
    weights: &[Vec<f64>],
    params: &BatchNormParams,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let filters = weights.len();
    if params.gamma.len() != filters
        || params.beta.len() != filters
        || params.mean.len() != filters
        || params.variance.len() != filters
    {
        return Err(Error::ShapeMismatch(format!(
            "batch-norm parameters sized for {} channels, weights have {filters}",
            params.gamma.len()
        )));
    }
    let mut folded = Vec::with_capacity(filters);
    let mut biases = Vec::with_capacity(filters);
    for (f, filter) in weights.iter().enumerate() {
        let sigma = (params.variance[f] + params.epsilon).sqrt();
        let scale = params.gamma[f] / sigma;
        folded.push(filter.iter().map(|&w| w * scale).collect());
        biases.push(params.beta[f] - params.mean[f] * scale);
    }
    Ok((folded, biases))
}

/// Classification over final-layer accumulators. Softmax is monotone, so
/// the integer argmax decides the class; ties break to the lowest index.
pub fn argmax(values: &[i64]) -> usize {
    let mut best = 0usize;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Classifier head: softmax followed by argmax collapses to integer
/// argmax by monotonicity.
pub fn softmax_argmax(logits: &Tensor) -> usize {
    argmax(&logits.data)
}

/// Real-valued softmax for trace output only.
pub fn softmax(values: &[i64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let max = *values.iter().max().unwrap() as f64;
    let exps: Vec<f64> = values.iter().map(|&v| ((v as f64) - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
