//! Per-channel batch normalization over `[B, C, H, W]` tensors.

use super::{Mode, Parameter, Tensor};
use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

/// Intermediates of a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    pub normalized: Tensor,
    pub inv_std: Vec<f64>,
}

fn channel_slices(shape: [usize; 4]) -> impl Iterator<Item = (usize, std::ops::Range<usize>)> {
    let [b, c, h, w] = shape;
    let plane = h * w;
    (0..b).flat_map(move |bi| (0..c).map(move |ci| (ci, (bi * c + ci) * plane..(bi * c + ci + 1) * plane)))
}

/// Normalizes by batch statistics. Returns the output, the cache for the
/// backward pass, and the per-channel batch mean and biased variance.
pub fn batch_norm_train_forward(
    input: &Tensor,
    gamma: &[f64],
    beta: &[f64],
    epsilon: f64,
) -> Result<(Tensor, BatchNormCache, Vec<f64>, Vec<f64>)> {
    let shape = input.dims4()?;
    let [b, c, h, w] = shape;
    check_channels(c, gamma, beta)?;
    let count = b * h * w;
    if count < 2 {
        return Err(Error::Shape(format!(
            "batch norm in training mode needs at least 2 values per channel, got {count}"
        )));
    }
    let x = input.data();
    let mut mean = vec![0.0; c];
    for (ci, r) in channel_slices(shape) {
        mean[ci] += x[r].iter().sum::<f64>();
    }
    mean.iter_mut().for_each(|m| *m /= count as f64);
    let mut var = vec![0.0; c];
    for (ci, r) in channel_slices(shape) {
        var[ci] += x[r].iter().map(|v| (v - mean[ci]).powi(2)).sum::<f64>();
    }
    var.iter_mut().for_each(|v| *v /= count as f64);
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + epsilon).sqrt()).collect();

    let mut normalized = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    for (ci, r) in channel_slices(shape) {
        for i in r {
            let n = (x[i] - mean[ci]) * inv_std[ci];
            normalized[i] = n;
            out[i] = gamma[ci] * n + beta[ci];
        }
    }
    let cache = BatchNormCache {
        normalized: Tensor::new(input.shape(), normalized)?,
        inv_std,
    };
    Ok((Tensor::new(input.shape(), out)?, cache, mean, var))
}

/// Gradients for a training-mode forward pass: `(d_input, d_gamma, d_beta)`.
pub fn batch_norm_train_backward(
    cache: &BatchNormCache,
    gamma: &[f64],
    grad_out: &Tensor,
) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
    if grad_out.shape() != cache.normalized.shape() {
        return Err(Error::Shape(format!(
            "batch norm backward: gradient {:?} vs activation {:?}",
            grad_out.shape(),
            cache.normalized.shape()
        )));
    }
    let shape = grad_out.dims4()?;
    let [b, c, h, w] = shape;
    let count = (b * h * w) as f64;
    let dy = grad_out.data();
    let xhat = cache.normalized.data();

    let mut dgamma = vec![0.0; c];
    let mut dbeta = vec![0.0; c];
    for (ci, r) in channel_slices(shape) {
        for i in r {
            dbeta[ci] += dy[i];
            dgamma[ci] += dy[i] * xhat[i];
        }
    }
    let mut dx = vec![0.0; dy.len()];
    for (ci, r) in channel_slices(shape) {
        let scale = gamma[ci] * cache.inv_std[ci] / count;
        for i in r {
            dx[i] = scale * (count * dy[i] - dbeta[ci] - xhat[i] * dgamma[ci]);
        }
    }
    Ok((Tensor::new(grad_out.shape(), dx)?, dgamma, dbeta))
}

/// Normalizes by fixed statistics: a per-channel affine map.
pub fn batch_norm_eval_forward(
    input: &Tensor,
    gamma: &[f64],
    beta: &[f64],
    mean: &[f64],
    var: &[f64],
    epsilon: f64,
) -> Result<Tensor> {
    let shape = input.dims4()?;
    check_channels(shape[1], gamma, beta)?;
    let x = input.data();
    let mut out = vec![0.0; x.len()];
    for (ci, r) in channel_slices(shape) {
        let inv_std = 1.0 / (var[ci] + epsilon).sqrt();
        for i in r {
            out[i] = gamma[ci] * (x[i] - mean[ci]) * inv_std + beta[ci];
        }
    }
    Tensor::new(input.shape(), out)
}

fn check_channels(c: usize, gamma: &[f64], beta: &[f64]) -> Result<()> {
    if gamma.len() != c || beta.len() != c {
        return Err(Error::Shape(format!(
            "batch norm over {c} channels with {} gamma / {} beta values",
            gamma.len(),
            beta.len()
        )));
    }
    Ok(())
}

enum Saved {
    None,
    Train(BatchNormCache),
}

/// Batch normalization layer with learned scale/shift and running statistics.
pub struct BatchNorm {
    pub gamma: Parameter,
    pub beta: Parameter,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub epsilon: f64,
    pub momentum: f64,
    pub mode: Mode,
    saved: Saved,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Parameter::new(Tensor::full(&[channels], 1.0), false),
            beta: Parameter::new(Tensor::zeros(&[channels]), false),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], 1.0),
            epsilon: DEFAULT_EPSILON,
            momentum: DEFAULT_MOMENTUM,
            mode: Mode::Train,
            saved: Saved::None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.numel()
    }

    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        match self.mode {
            Mode::Train => {
                let (out, cache, mean, var) = batch_norm_train_forward(
                    input,
                    self.gamma.value.data(),
                    self.beta.value.data(),
                    self.epsilon,
                )?;
                let [b, _, h, w] = input.dims4()?;
                let n = (b * h * w) as f64;
                let m = self.momentum;
                for (r, bm) in self.running_mean.data_mut().iter_mut().zip(&mean) {
                    *r = (1.0 - m) * *r + m * bm;
                }
                // Running variance tracks the unbiased estimate.
                for (r, bv) in self.running_var.data_mut().iter_mut().zip(&var) {
                    *r = (1.0 - m) * *r + m * bv * n / (n - 1.0);
                }
                self.saved = Saved::Train(cache);
                Ok(out)
            }
            Mode::Eval => {
                let out = batch_norm_eval_forward(
                    input,
                    self.gamma.value.data(),
                    self.beta.value.data(),
                    self.running_mean.data(),
                    self.running_var.data(),
                    self.epsilon,
                )?;
                self.saved = Saved::None;
                Ok(out)
            }
        }
    }

    /// Accumulates parameter gradients and returns the input gradient.
    /// Only valid after a training-mode forward pass.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let Saved::Train(cache) = &self.saved else {
            return Err(Error::Shape(
                "batch norm backward without a training-mode forward".into(),
            ));
        };
        let (dx, dgamma, dbeta) = batch_norm_train_backward(cache, self.gamma.value.data(), grad_out)?;
        for (g, d) in self.gamma.grad.data_mut().iter_mut().zip(&dgamma) {
            *g += d;
        }
        for (g, d) in self.beta.grad.data_mut().iter_mut().zip(&dbeta) {
            *g += d;
        }
        Ok(dx)
    }

    pub fn clear_cache(&mut self) {
        self.saved = Saved::None;
    }
}
