use super::Tensor;
use crate::error::{Error, Result};

/// A trainable tensor with its gradient and momentum buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub value: Tensor,
    pub grad: Tensor,
    pub momentum_buffer: Tensor,
    /// Whether weight decay applies (conv and linear weights only).
    pub decay: bool,
}

impl Parameter {
    pub fn new(value: Tensor, decay: bool) -> Self {
        let shape = value.shape().to_vec();
        Self {
            value,
            grad: Tensor::zeros(&shape),
            momentum_buffer: Tensor::zeros(&shape),
            decay,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn numel(&self) -> usize {
        self.value.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sgd {
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for Sgd {
    fn default() -> Self {
        Self {
            momentum: 0.9,
            weight_decay: 1e-4,
        }
    }
}

impl Sgd {
    /// One momentum step over `params`, then zeroes their gradients.
    ///
    /// `buffer <- momentum * buffer + grad + weight_decay * value` (decay only
    /// where the parameter opts in), then `value <- value - lr * buffer`.
    /// Nothing is updated if any gradient is non-finite.
    pub fn step<'a>(&self, params: impl IntoIterator<Item = &'a mut Parameter>, lr: f64) -> Result<()> {
        let mut params: Vec<&mut Parameter> = params.into_iter().collect();
        if let Some(i) = params.iter().position(|p| !p.grad.all_finite()) {
            return Err(Error::Data(format!("non-finite gradient in parameter {i}")));
        }
        for p in params.iter_mut() {
            let decay = if p.decay { self.weight_decay } else { 0.0 };
            let Parameter {
                value,
                grad,
                momentum_buffer,
                ..
            } = &mut **p;
            for ((v, g), buf) in value
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(momentum_buffer.data_mut())
            {
                *buf = self.momentum * *buf + g + decay * *v;
                *v -= lr * *buf;
            }
            p.zero_grad();
        }
        Ok(())
    }
}

pub fn sgd_step<'a>(
    params: impl IntoIterator<Item = &'a mut Parameter>,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<()> {
    Sgd {
        momentum,
        weight_decay,
    }
    .step(params, lr)
}
