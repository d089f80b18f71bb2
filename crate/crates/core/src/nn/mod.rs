//! A small dense-tensor core: the operators a CIFAR-style residual network
//! needs, each with a hand-written backward pass, plus SGD and checkpoints.

mod batchnorm;
mod checkpoint;
mod conv;
mod ops;
mod optim;
mod tensor;

pub use batchnorm::{
    batch_norm_eval_forward, batch_norm_train_backward, batch_norm_train_forward, BatchNorm,
    BatchNormCache, DEFAULT_EPSILON, DEFAULT_MOMENTUM,
};
pub use checkpoint::{Checkpoint, CheckpointEntry, EntryKind, FORMAT_VERSION};
pub use conv::{conv2d_backward, conv2d_forward, output_size};
pub use ops::{
    global_avg_pool, global_avg_pool_backward, linear, linear_backward, relu, relu_backward,
    softmax, softmax_cross_entropy,
};
pub use optim::{sgd_step, Parameter, Sgd};
pub use tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Train,
    Eval,
}
