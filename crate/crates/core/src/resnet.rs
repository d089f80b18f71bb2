//! CIFAR-style residual networks of depth `6n + 2`.
//!
//! Layout: a 3x3 stem convolution (3 -> 16) with batch norm and ReLU, three
//! stages of `n` basic blocks at widths 16/32/64, then global average pooling
//! and a linear classifier. The first block of stages two and three halves
//! the spatial size with a stride-2 convolution; its shortcut subsamples and
//! zero-pads channels instead of using a projection.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    conv2d_backward, conv2d_forward, global_avg_pool, global_avg_pool_backward, linear,
    linear_backward, relu, relu_backward, BatchNorm, Checkpoint, CheckpointEntry, EntryKind,
    Mode, Parameter, Tensor,
};

pub const VALID_DEPTHS: [usize; 5] = [20, 32, 44, 56, 110];
pub const INPUT_CHANNELS: usize = 3;
pub const INPUT_SIZE: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResNetConfig {
    pub depth: usize,
    pub num_classes: usize,
    pub stage_widths: [usize; 3],
    pub seed: u64,
    /// Spatial input size; 32 for real use, smaller only for toy checks.
    #[serde(default = "default_input_size")]
    pub input_size: usize,
}

fn default_input_size() -> usize {
    INPUT_SIZE
}

impl ResNetConfig {
    pub fn new(depth: usize, num_classes: usize, seed: u64) -> Self {
        Self {
            depth,
            num_classes,
            stage_widths: [16, 32, 64],
            seed,
            input_size: INPUT_SIZE,
        }
    }

    pub fn blocks_per_stage(&self) -> usize {
        (self.depth - 2) / 6
    }

    pub fn validate(&self) -> Result<()> {
        if !VALID_DEPTHS.contains(&self.depth) {
            return Err(Error::Config(format!(
                "depth {} is not supported; valid depths are {VALID_DEPTHS:?}",
                self.depth
            )));
        }
        if self.num_classes == 0 {
            return Err(Error::Config("num_classes must be positive".into()));
        }
        let [w1, w2, w3] = self.stage_widths;
        if w1 == 0 || w2 != 2 * w1 || w3 != 2 * w2 {
            return Err(Error::Config(format!(
                "stage widths {:?} must double per stage",
                self.stage_widths
            )));
        }
        if self.input_size < 4 || !self.input_size.is_multiple_of(4) {
            return Err(Error::Config(format!(
                "input size {} must be a positive multiple of 4",
                self.input_size
            )));
        }
        Ok(())
    }
}

/// 3x3 convolution layer without bias.
pub struct Conv {
    pub weight: Parameter,
    pub stride: usize,
    input: Option<Tensor>,
}

impl Conv {
    fn new(c_in: usize, c_out: usize, stride: usize, rng: &mut ChaCha8Rng) -> Self {
        let fan_out = (c_out * 9) as f64;
        let normal = Normal::new(0.0, (2.0 / fan_out).sqrt()).expect("positive std");
        let weight = Tensor::from_fn(&[c_out, c_in, 3, 3], |_| normal.sample(rng));
        Self {
            weight: Parameter::new(weight, true),
            stride,
            input: None,
        }
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let out = conv2d_forward(x, &self.weight.value, self.stride)?;
        self.input = (mode == Mode::Train).then(|| x.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let input = self
            .input
            .as_ref()
            .ok_or_else(|| Error::Shape("conv backward without a training-mode forward".into()))?;
        let (gi, gw) = conv2d_backward(input, &self.weight.value, self.stride, grad_out)?;
        self.weight.grad.add_assign(&gw)?;
        Ok(gi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shortcut {
    Identity,
    DownsampleZeroPad,
}

/// Stride-2 subsampling followed by zero-padding channels from `C` to `2C`.
pub fn downsample_shortcut(x: &Tensor) -> Result<Tensor> {
    let [b, c, h, w] = x.dims4()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Shape(format!(
            "downsampling shortcut needs even spatial dims, got {h}x{w}"
        )));
    }
    let (ho, wo) = (h / 2, w / 2);
    let mut out = vec![0.0; b * 2 * c * ho * wo];
    let src = x.data();
    for bi in 0..b {
        for ci in 0..c {
            for i in 0..ho {
                for j in 0..wo {
                    out[((bi * 2 * c + ci) * ho + i) * wo + j] =
                        src[((bi * c + ci) * h + 2 * i) * w + 2 * j];
                }
            }
        }
    }
    Tensor::new(&[b, 2 * c, ho, wo], out)
}

fn downsample_shortcut_backward(input_shape: [usize; 4], grad_out: &Tensor) -> Result<Tensor> {
    let [b, c, h, w] = input_shape;
    let (ho, wo) = (h / 2, w / 2);
    let g = grad_out.data();
    let mut gi = vec![0.0; b * c * h * w];
    for bi in 0..b {
        for ci in 0..c {
            for i in 0..ho {
                for j in 0..wo {
                    gi[((bi * c + ci) * h + 2 * i) * w + 2 * j] = g[((bi * 2 * c + ci) * ho + i) * wo + j];
                }
            }
        }
    }
    Tensor::new(&input_shape, gi)
}

/// Basic block: conv-BN-ReLU-conv-BN, plus shortcut, then ReLU.
pub struct ResidualBlock {
    pub conv1: Conv,
    pub bn1: BatchNorm,
    pub conv2: Conv,
    pub bn2: BatchNorm,
    pub shortcut: Shortcut,
    input_shape: [usize; 4],
    // pre-activations of the two ReLUs
    mid: Option<Tensor>,
    sum: Option<Tensor>,
}

impl ResidualBlock {
    fn new(c_in: usize, c_out: usize, stride: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            conv1: Conv::new(c_in, c_out, stride, rng),
            bn1: BatchNorm::new(c_out),
            conv2: Conv::new(c_out, c_out, 1, rng),
            bn2: BatchNorm::new(c_out),
            shortcut: if stride == 2 {
                Shortcut::DownsampleZeroPad
            } else {
                Shortcut::Identity
            },
            input_shape: [0; 4],
            mid: None,
            sum: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        self.bn1.mode = mode;
        self.bn2.mode = mode;
        let mid = self.bn1.forward(&self.conv1.forward(x, mode)?)?;
        let branch = self.bn2.forward(&self.conv2.forward(&relu(&mid), mode)?)?;
        let mut sum = match self.shortcut {
            Shortcut::Identity => x.clone(),
            Shortcut::DownsampleZeroPad => downsample_shortcut(x)?,
        };
        sum.add_assign(&branch)?;
        let out = relu(&sum);
        self.input_shape = x.dims4()?;
        if mode == Mode::Train {
            self.mid = Some(mid);
            self.sum = Some(sum);
        } else {
            self.mid = None;
            self.sum = None;
        }
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let (Some(mid), Some(sum)) = (&self.mid, &self.sum) else {
            return Err(Error::Shape("block backward without a training-mode forward".into()));
        };
        let g_sum = relu_backward(sum, grad_out)?;
        let g_mid = relu_backward(mid, &self.conv2.backward(&self.bn2.backward(&g_sum)?)?)?;
        let mut g_in = self.conv1.backward(&self.bn1.backward(&g_mid)?)?;
        match self.shortcut {
            Shortcut::Identity => g_in.add_assign(&g_sum)?,
            Shortcut::DownsampleZeroPad => {
                g_in.add_assign(&downsample_shortcut_backward(self.input_shape, &g_sum)?)?
            }
        }
        Ok(g_in)
    }

    fn named_parameters_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Parameter)>) {
        out.push((format!("{prefix}.conv1.weight"), &mut self.conv1.weight));
        out.push((format!("{prefix}.bn1.gamma"), &mut self.bn1.gamma));
        out.push((format!("{prefix}.bn1.beta"), &mut self.bn1.beta));
        out.push((format!("{prefix}.conv2.weight"), &mut self.conv2.weight));
        out.push((format!("{prefix}.bn2.gamma"), &mut self.bn2.gamma));
        out.push((format!("{prefix}.bn2.beta"), &mut self.bn2.beta));
    }
}

/// Activations returned by [`ResNet::forward_traced`].
pub struct ForwardTrace {
    pub logits: Tensor,
    pub stage_outputs: Vec<Tensor>,
}

pub struct ResNet {
    config: ResNetConfig,
    pub stem_conv: Conv,
    pub stem_bn: BatchNorm,
    pub stages: Vec<Vec<ResidualBlock>>,
    pub fc_weight: Parameter,
    pub fc_bias: Parameter,
    stem_pre: Option<Tensor>,
    pool_input_shape: Vec<usize>,
    pooled: Option<Tensor>,
}

impl ResNet {
    /// Builds a freshly initialized network, deterministic in `config.seed`.
    pub fn build(config: ResNetConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let n = config.blocks_per_stage();
        let [w1, _, w3] = config.stage_widths;
        let stem_conv = Conv::new(INPUT_CHANNELS, w1, 1, &mut rng);
        let mut stages = Vec::with_capacity(3);
        let mut c_in = w1;
        for (s, &width) in config.stage_widths.iter().enumerate() {
            let blocks = (0..n)
                .map(|i| {
                    let stride = if s > 0 && i == 0 { 2 } else { 1 };
                    let block = ResidualBlock::new(c_in, width, stride, &mut rng);
                    c_in = width;
                    block
                })
                .collect();
            stages.push(blocks);
        }
        let bound = 1.0 / (w3 as f64).sqrt();
        let fc = Tensor::from_fn(&[config.num_classes, w3], |_| rng.random_range(-bound..bound));
        Ok(Self {
            stem_conv,
            stem_bn: BatchNorm::new(w1),
            stages,
            fc_weight: Parameter::new(fc, true),
            fc_bias: Parameter::new(Tensor::zeros(&[config.num_classes]), false),
            stem_pre: None,
            pool_input_shape: Vec::new(),
            pooled: None,
            config,
        })
    }

    pub fn config(&self) -> &ResNetConfig {
        &self.config
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    /// Convolutions plus the final linear layer.
    pub fn weighted_layer_count(&self) -> usize {
        1 + 2 * self.stages.iter().map(Vec::len).sum::<usize>() + 1
    }

    pub fn block_count(&self) -> usize {
        self.stages.iter().map(Vec::len).sum()
    }

    pub fn blocks_mut(&mut self) -> impl Iterator<Item = &mut ResidualBlock> {
        self.stages.iter_mut().flatten()
    }

    pub fn param_count(&mut self) -> usize {
        self.named_parameters_mut().iter().map(|(_, p)| p.numel()).sum()
    }

    pub fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        Ok(self.forward_traced(input, mode)?.logits)
    }

    pub fn forward_traced(&mut self, input: &Tensor, mode: Mode) -> Result<ForwardTrace> {
        let [_, c, h, w] = input.dims4()?;
        let s = self.config.input_size;
        if c != INPUT_CHANNELS || h != s || w != s {
            return Err(Error::Shape(format!(
                "network expects [B, {INPUT_CHANNELS}, {s}, {s}] input, got {:?}",
                input.shape()
            )));
        }
        self.stem_bn.mode = mode;
        let pre = self.stem_bn.forward(&self.stem_conv.forward(input, mode)?)?;
        let mut x = relu(&pre);
        self.stem_pre = (mode == Mode::Train).then_some(pre);

        let mut stage_outputs = Vec::with_capacity(3);
        for stage in &mut self.stages {
            for block in stage.iter_mut() {
                x = block.forward(&x, mode)?;
            }
            stage_outputs.push(x.clone());
        }
        self.pool_input_shape = x.shape().to_vec();
        let pooled = global_avg_pool(&x)?;
        let logits = linear(&pooled, &self.fc_weight.value, &self.fc_bias.value)?;
        self.pooled = (mode == Mode::Train).then_some(pooled);
        Ok(ForwardTrace {
            logits,
            stage_outputs,
        })
    }

    /// Backpropagates `grad_logits` from the last training-mode forward,
    /// accumulating parameter gradients. Returns the input gradient.
    pub fn backward(&mut self, grad_logits: &Tensor) -> Result<Tensor> {
        let (Some(pooled), Some(stem_pre)) = (&self.pooled, &self.stem_pre) else {
            return Err(Error::Shape("backward without a training-mode forward".into()));
        };
        let (g_pooled, g_w, g_b) = linear_backward(pooled, &self.fc_weight.value, grad_logits)?;
        self.fc_weight.grad.add_assign(&g_w)?;
        self.fc_bias.grad.add_assign(&g_b)?;
        let mut g = global_avg_pool_backward(&self.pool_input_shape, &g_pooled)?;
        for stage in self.stages.iter_mut().rev() {
            for block in stage.iter_mut().rev() {
                g = block.backward(&g)?;
            }
        }
        let g = relu_backward(stem_pre, &g)?;
        let g = self.stem_bn.backward(&g)?;
        self.stem_conv.backward(&g)
    }

    /// Trainable parameters in a fixed order with stable names.
    pub fn named_parameters_mut(&mut self) -> Vec<(String, &mut Parameter)> {
        let mut out = Vec::new();
        out.push(("stem.conv.weight".to_string(), &mut self.stem_conv.weight));
        out.push(("stem.bn.gamma".to_string(), &mut self.stem_bn.gamma));
        out.push(("stem.bn.beta".to_string(), &mut self.stem_bn.beta));
        for (s, stage) in self.stages.iter_mut().enumerate() {
            for (b, block) in stage.iter_mut().enumerate() {
                block.named_parameters_mut(&format!("stage{}.block{}", s + 1, b), &mut out);
            }
        }
        out.push(("fc.weight".to_string(), &mut self.fc_weight));
        out.push(("fc.bias".to_string(), &mut self.fc_bias));
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        self.named_parameters_mut().into_iter().map(|(_, p)| p).collect()
    }

    pub fn zero_grad(&mut self) {
        for p in self.parameters_mut() {
            p.zero_grad();
        }
    }

    fn named_batch_norms_mut(&mut self) -> Vec<(String, &mut BatchNorm)> {
        let mut out = vec![("stem.bn".to_string(), &mut self.stem_bn)];
        for (s, stage) in self.stages.iter_mut().enumerate() {
            for (b, block) in stage.iter_mut().enumerate() {
                out.push((format!("stage{}.block{b}.bn1", s + 1), &mut block.bn1));
                out.push((format!("stage{}.block{b}.bn2", s + 1), &mut block.bn2));
            }
        }
        out
    }

    fn architecture_meta(&self) -> BTreeMap<String, String> {
        let c = &self.config;
        let [w1, w2, w3] = c.stage_widths;
        BTreeMap::from([
            ("arch".to_string(), "resnet".to_string()),
            ("depth".to_string(), c.depth.to_string()),
            ("num_classes".to_string(), c.num_classes.to_string()),
            ("widths".to_string(), format!("{w1},{w2},{w3}")),
            ("input_size".to_string(), c.input_size.to_string()),
        ])
    }

    /// Parameters, then running statistics, under an architecture header.
    pub fn to_checkpoint(&mut self) -> Checkpoint {
        let meta = self.architecture_meta();
        let mut entries: Vec<CheckpointEntry> = self
            .named_parameters_mut()
            .into_iter()
            .map(|(name, p)| CheckpointEntry {
                name,
                kind: EntryKind::Parameter,
                tensor: p.value.clone(),
            })
            .collect();
        for (name, bn) in self.named_batch_norms_mut() {
            entries.push(CheckpointEntry {
                name: format!("{name}.running_mean"),
                kind: EntryKind::RunningStat,
                tensor: bn.running_mean.clone(),
            });
            entries.push(CheckpointEntry {
                name: format!("{name}.running_var"),
                kind: EntryKind::RunningStat,
                tensor: bn.running_var.clone(),
            });
        }
        Checkpoint { meta, entries }
    }

    /// Overwrites parameters and running statistics. The checkpoint's
    /// architecture header must match this model.
    pub fn load_checkpoint(&mut self, ckpt: &Checkpoint) -> Result<()> {
        let expected = self.architecture_meta();
        for (k, v) in &expected {
            match ckpt.meta.get(k) {
                Some(found) if found == v => {}
                found => {
                    return Err(Error::Checkpoint(format!(
                        "architecture mismatch on '{k}': model has {v}, checkpoint has {found:?}"
                    )))
                }
            }
        }
        let mut by_name: BTreeMap<&str, &CheckpointEntry> =
            ckpt.entries.iter().map(|e| (e.name.as_str(), e)).collect();
        let mut take = |name: &str, kind: EntryKind, shape: &[usize]| -> Result<Tensor> {
            let e = by_name
                .remove(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing entry '{name}'")))?;
            if e.kind != kind || e.tensor.shape() != shape {
                return Err(Error::Checkpoint(format!(
                    "entry '{name}' has kind {:?} shape {:?}, expected {kind:?} {shape:?}",
                    e.kind,
                    e.tensor.shape()
                )));
            }
            Ok(e.tensor.clone())
        };
        for (name, p) in self.named_parameters_mut() {
            let shape = p.value.shape().to_vec();
            p.value = take(&name, EntryKind::Parameter, &shape)?;
            p.zero_grad();
            p.momentum_buffer.fill(0.0);
        }
        for (name, bn) in self.named_batch_norms_mut() {
            let shape = [bn.channels()];
            bn.running_mean = take(&format!("{name}.running_mean"), EntryKind::RunningStat, &shape)?;
            bn.running_var = take(&format!("{name}.running_var"), EntryKind::RunningStat, &shape)?;
        }
        if let Some(extra) = by_name.keys().next() {
            return Err(Error::Checkpoint(format!("unexpected entry '{extra}'")));
        }
        Ok(())
    }

    /// Builds the model described by a checkpoint header and loads it.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let get = |k: &str| {
            ckpt.meta
                .get(k)
                .ok_or_else(|| Error::Checkpoint(format!("header lacks '{k}'")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("header field '{k}' is not an integer")))
        };
        let widths: Vec<usize> = get("widths")?
            .split(',')
            .map(|w| w.parse().map_err(|_| Error::Checkpoint("bad widths".into())))
            .collect::<Result<_>>()?;
        let stage_widths: [usize; 3] = widths
            .try_into()
            .map_err(|_| Error::Checkpoint("widths must have 3 entries".into()))?;
        let config = ResNetConfig {
            depth: num("depth")?,
            num_classes: num("num_classes")?,
            stage_widths,
            seed: 0,
            input_size: num("input_size")?,
        };
        let mut model = Self::build(config)?;
        model.load_checkpoint(ckpt)?;
        Ok(model)
    }
}
