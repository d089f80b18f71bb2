//! Activation, pooling, dense and loss operators with their gradients.

use super::Tensor;
use crate::error::{Error, Result};

pub fn relu(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    out
}

/// Passes gradient where the forward input was strictly positive.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    if input.shape() != grad_out.shape() {
        return Err(Error::Shape(format!(
            "relu backward: input {:?} vs gradient {:?}",
            input.shape(),
            grad_out.shape()
        )));
    }
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::new(input.shape(), data)
}

/// `[B, C, H, W] -> [B, C]` spatial mean.
pub fn global_avg_pool(input: &Tensor) -> Result<Tensor> {
    let [b, c, h, w] = input.dims4()?;
    let plane = h * w;
    let data = input
        .data()
        .chunks_exact(plane)
        .map(|ch| ch.iter().sum::<f64>() / plane as f64)
        .collect();
    Tensor::new(&[b, c], data)
}

pub fn global_avg_pool_backward(input_shape: &[usize], grad_out: &Tensor) -> Result<Tensor> {
    let [b, c, h, w] = input_shape[..] else {
        return Err(Error::Shape(format!("pool backward: input shape {input_shape:?}")));
    };
    if grad_out.shape() != [b, c] {
        return Err(Error::Shape(format!(
            "pool backward: gradient {:?} for input {input_shape:?}",
            grad_out.shape()
        )));
    }
    let plane = h * w;
    let mut data = Vec::with_capacity(b * c * plane);
    for &g in grad_out.data() {
        data.extend(std::iter::repeat_n(g / plane as f64, plane));
    }
    Tensor::new(input_shape, data)
}

/// `input [B, D] * weights[K, D]^T + bias[K]`.
pub fn linear(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let [b, d] = input.dims2()?;
    let [k, wd] = weights.dims2()?;
    if wd != d || bias.shape() != [k] {
        return Err(Error::Shape(format!(
            "linear: input {:?}, weights {:?}, bias {:?}",
            input.shape(),
            weights.shape(),
            bias.shape()
        )));
    }
    let (x, w) = (input.data(), weights.data());
    let mut out = Vec::with_capacity(b * k);
    for row in x.chunks_exact(d) {
        for (wrow, bias) in w.chunks_exact(d).zip(bias.data()) {
            out.push(bias + row.iter().zip(wrow).map(|(a, b)| a * b).sum::<f64>());
        }
    }
    Tensor::new(&[b, k], out)
}

/// Returns `(d_input, d_weights, d_bias)`.
pub fn linear_backward(
    input: &Tensor,
    weights: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let [b, d] = input.dims2()?;
    let [k, _] = weights.dims2()?;
    if grad_out.shape() != [b, k] {
        return Err(Error::Shape(format!(
            "linear backward: gradient {:?}, expected [{b}, {k}]",
            grad_out.shape()
        )));
    }
    let (x, w, g) = (input.data(), weights.data(), grad_out.data());
    let mut dx = vec![0.0; b * d];
    let mut dw = vec![0.0; k * d];
    let mut db = vec![0.0; k];
    for bi in 0..b {
        for ki in 0..k {
            let gv = g[bi * k + ki];
            db[ki] += gv;
            for di in 0..d {
                dx[bi * d + di] += gv * w[ki * d + di];
                dw[ki * d + di] += gv * x[bi * d + di];
            }
        }
    }
    Ok((
        Tensor::new(&[b, d], dx)?,
        Tensor::new(&[k, d], dw)?,
        Tensor::new(&[k], db)?,
    ))
}

/// Row-wise softmax, stabilized by subtracting the row maximum.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    let [_, k] = logits.dims2()?;
    let mut out = logits.clone();
    for row in out.data_mut().chunks_exact_mut(k) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(out)
}

/// Mean negative log-likelihood and its gradient `(softmax - onehot) / B`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let [b, k] = logits.dims2()?;
    if labels.len() != b {
        return Err(Error::Shape(format!("{} labels for a batch of {b}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Data(format!("label {bad} out of range for {k} classes")));
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; b * k];
    for ((row, &label), grow) in logits
        .data()
        .chunks_exact(k)
        .zip(labels)
        .zip(grad.chunks_exact_mut(k))
    {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_sum = sum.ln();
        loss += log_sum - (row[label] - max);
        for (g, v) in grow.iter_mut().zip(row) {
            *g = (v - max).exp() / sum / b as f64;
        }
        grow[label] -= 1.0 / b as f64;
    }
    Ok((loss / b as f64, Tensor::new(&[b, k], grad)?))
}
