//! Finite-difference checks for every backward operator. Each function
//! returns the worst relative error it saw.

use rand::Rng;
use skelres_core::nn::{
    batch_norm_train_backward, batch_norm_train_forward, conv2d_backward, conv2d_forward,
    global_avg_pool, global_avg_pool_backward, linear, linear_backward, relu, relu_backward,
    softmax_cross_entropy, Mode, Tensor, DEFAULT_EPSILON,
};
use skelres_core::resnet::{ResNet, ResNetConfig};

use super::{max_gradient_error, probe_loss, random_tensor, random_tensor_off_zero, rng};

pub const OP_TOLERANCE: f64 = 1e-4;
pub const NETWORK_TOLERANCE: f64 = 1e-3;

fn with(t: &Tensor, x: &[f64]) -> Tensor {
    Tensor::new(t.shape(), x.to_vec()).unwrap()
}

/// (batch, c_in, c_out, size, stride)
pub const CONV_SHAPES: [(usize, usize, usize, usize, usize); 6] = [
    (1, 1, 1, 4, 1),
    (2, 2, 3, 4, 1),
    (1, 3, 2, 5, 1),
    (2, 2, 4, 4, 2),
    (1, 4, 2, 6, 2),
    (3, 1, 2, 3, 1),
];

pub fn conv(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for &(b, ci, co, s, stride) in &CONV_SHAPES {
        let x = random_tensor(&mut r, &[b, ci, s, s]);
        let w = random_tensor(&mut r, &[co, ci, 3, 3]);
        let out = conv2d_forward(&x, &w, stride).unwrap();
        let probe = random_tensor(&mut r, out.shape());
        let (gx, gw) = conv2d_backward(&x, &w, stride, &probe).unwrap();
        worst = worst.max(max_gradient_error(x.data(), gx.data(), None, |v| {
            probe_loss(&conv2d_forward(&with(&x, v), &w, stride).unwrap(), &probe)
        }));
        worst = worst.max(max_gradient_error(w.data(), gw.data(), None, |v| {
            probe_loss(&conv2d_forward(&x, &with(&w, v), stride).unwrap(), &probe)
        }));
    }
    worst
}

pub const BN_SHAPES: [[usize; 4]; 5] = [[2, 1, 2, 2], [3, 2, 1, 1], [2, 3, 3, 3], [4, 2, 2, 1], [1, 2, 3, 2]];

pub fn batch_norm(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for shape in BN_SHAPES {
        let c = shape[1];
        let x = random_tensor(&mut r, &shape);
        let gamma: Vec<f64> = (0..c).map(|_| r.random_range(0.5..1.5)).collect();
        let beta: Vec<f64> = (0..c).map(|_| r.random_range(-0.5..0.5)).collect();
        let probe = random_tensor(&mut r, &shape);
        let forward = |x: &Tensor, g: &[f64], b: &[f64]| {
            probe_loss(&batch_norm_train_forward(x, g, b, DEFAULT_EPSILON).unwrap().0, &probe)
        };
        let (_, cache, _, _) = batch_norm_train_forward(&x, &gamma, &beta, DEFAULT_EPSILON).unwrap();
        let (dx, dg, db) = batch_norm_train_backward(&cache, &gamma, &probe).unwrap();
        worst = worst.max(max_gradient_error(x.data(), dx.data(), None, |v| forward(&with(&x, v), &gamma, &beta)));
        worst = worst.max(max_gradient_error(&gamma, &dg, None, |v| forward(&x, v, &beta)));
        worst = worst.max(max_gradient_error(&beta, &db, None, |v| forward(&x, &gamma, v)));
    }
    worst
}

pub const DENSE_SHAPES: [[usize; 4]; 5] = [[1, 1, 2, 2], [2, 3, 4, 4], [3, 2, 1, 1], [1, 4, 3, 5], [2, 1, 6, 2]];

pub fn relu_op(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for shape in DENSE_SHAPES {
        let x = random_tensor_off_zero(&mut r, &shape);
        let probe = random_tensor(&mut r, &shape);
        let gx = relu_backward(&x, &probe).unwrap();
        worst = worst.max(max_gradient_error(x.data(), gx.data(), None, |v| {
            probe_loss(&relu(&with(&x, v)), &probe)
        }));
    }
    worst
}

pub fn pool(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for shape in DENSE_SHAPES {
        let x = random_tensor(&mut r, &shape);
        let probe = random_tensor(&mut r, &shape[..2]);
        let gx = global_avg_pool_backward(&shape, &probe).unwrap();
        worst = worst.max(max_gradient_error(x.data(), gx.data(), None, |v| {
            probe_loss(&global_avg_pool(&with(&x, v)).unwrap(), &probe)
        }));
    }
    worst
}

/// (batch, in, out)
pub const LINEAR_SHAPES: [(usize, usize, usize); 5] = [(1, 1, 1), (2, 3, 4), (4, 8, 2), (3, 5, 5), (1, 16, 8)];

pub fn linear_op(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for &(b, d, k) in &LINEAR_SHAPES {
        let x = random_tensor(&mut r, &[b, d]);
        let w = random_tensor(&mut r, &[k, d]);
        let bias = random_tensor(&mut r, &[k]);
        let probe = random_tensor(&mut r, &[b, k]);
        let (gx, gw, gb) = linear_backward(&x, &w, &probe).unwrap();
        worst = worst.max(max_gradient_error(x.data(), gx.data(), None, |v| {
            probe_loss(&linear(&with(&x, v), &w, &bias).unwrap(), &probe)
        }));
        worst = worst.max(max_gradient_error(w.data(), gw.data(), None, |v| {
            probe_loss(&linear(&x, &with(&w, v), &bias).unwrap(), &probe)
        }));
        worst = worst.max(max_gradient_error(bias.data(), gb.data(), None, |v| {
            probe_loss(&linear(&x, &w, &with(&bias, v)).unwrap(), &probe)
        }));
    }
    worst
}

pub fn cross_entropy(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for &(b, k) in &[(1usize, 2usize), (2, 3), (4, 8), (3, 5), (5, 11)] {
        let logits = Tensor::from_fn(&[b, k], |_| r.random_range(-4.0..4.0));
        let labels: Vec<usize> = (0..b).map(|_| r.random_range(0..k)).collect();
        let (_, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
        worst = worst.max(max_gradient_error(logits.data(), grad.data(), None, |v| {
            softmax_cross_entropy(&with(&logits, v), &labels).unwrap().0
        }));
    }
    worst
}

/// Checks a residual block in isolation, both with an identity and with a
/// downsampling shortcut.
pub fn residual_blocks(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut model = ResNet::build(ResNetConfig {
        input_size: 8,
        ..ResNetConfig::new(20, 3, seed)
    })
    .unwrap();
    let mut worst: f64 = 0.0;
    for (stage, width, size) in [(0usize, 16usize, 8usize), (1, 16, 8)] {
        let x = random_tensor(&mut r, &[2, width, size, size]);
        let block = &mut model.stages[stage][0];
        let out = block.forward(&x, Mode::Train).unwrap();
        let probe = random_tensor(&mut r, out.shape());
        let gx = block.backward(&probe).unwrap();
        let coords: Vec<usize> = (0..40).map(|_| r.random_range(0..x.len())).collect();
        worst = worst.max(max_gradient_error(x.data(), gx.data(), Some(&coords), |v| {
            probe_loss(&block.forward(&with(&x, v), Mode::Train).unwrap(), &probe)
        }));
    }
    worst
}

/// End-to-end check of a depth-20 network on 4x4 inputs (spatial sizes
/// 4 -> 2 -> 1): gradients of the loss with respect to sampled parameter
/// coordinates of every layer and to the input.
pub fn network(seed: u64) -> f64 {
    let mut r = rng(seed);
    let classes = 3;
    let mut model = ResNet::build(ResNetConfig {
        input_size: 4,
        ..ResNetConfig::new(20, classes, seed)
    })
    .unwrap();
    let x = Tensor::from_fn(&[3, 3, 4, 4], |_| r.random_range(0.0..1.0));
    let labels = [0usize, 2, 1];

    model.zero_grad();
    let logits = model.forward(&x, Mode::Train).unwrap();
    let (_, g) = softmax_cross_entropy(&logits, &labels).unwrap();
    let gx = model.backward(&g).unwrap();

    let n_params = model.parameters_mut().len();
    let mut worst: f64 = 0.0;
    for pi in 0..n_params {
        let (value, grad) = {
            let p = &mut model.parameters_mut()[pi];
            (p.value.clone(), p.grad.clone())
        };
        let coords: Vec<usize> = (0..3).map(|_| r.random_range(0..value.len())).collect();
        let err = max_gradient_error(value.data(), grad.data(), Some(&coords), |v| {
            model.parameters_mut()[pi].value = with(&value, v);
            let logits = model.forward(&x, Mode::Train).unwrap();
            softmax_cross_entropy(&logits, &labels).unwrap().0
        });
        model.parameters_mut()[pi].value = value;
        worst = worst.max(err);
    }
    let coords: Vec<usize> = (0..20).map(|_| r.random_range(0..x.len())).collect();
    worst.max(max_gradient_error(x.data(), gx.data(), Some(&coords), |v| {
        let logits = model.forward(&with(&x, v), Mode::Train).unwrap();
        softmax_cross_entropy(&logits, &labels).unwrap().0
    }))
}
