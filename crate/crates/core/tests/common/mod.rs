//! Independent oracles and fixture builders shared by the integration tests.
#![allow(dead_code)]

pub mod gradcheck;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skelres_core::dataset::{CorpusLayout, DatasetId, Joint, SequenceId, SkeletonFrame, SkeletonSequence};
use skelres_core::encoder::PartMap;
use skelres_core::harness::LabeledImages;
use skelres_core::nn::Tensor;
use skelres_core::raster::Image;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Random values bounded away from zero, so ReLU kinks stay out of reach of
/// finite-difference steps.
pub fn random_tensor_off_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let m = rng.random_range(0.05..1.0);
        if rng.random_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

// ---------------------------------------------------------------------------
// Finite differences

pub const FD_STEP: f64 = 1e-6;

/// Gradients below this magnitude are compared absolutely.
pub const FD_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

/// Central difference of `f` with respect to `x[i]`.
pub fn central_difference(x: &mut [f64], i: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = x[i];
    x[i] = orig + FD_STEP;
    let plus = f(x);
    x[i] = orig - FD_STEP;
    let minus = f(x);
    x[i] = orig;
    (plus - minus) / (2.0 * FD_STEP)
}

/// Largest relative error between `analytic` and central differences of
/// `f` at every coordinate of `x` (or at `coords` when given).
pub fn max_gradient_error(
    x: &[f64],
    analytic: &[f64],
    coords: Option<&[usize]>,
    mut f: impl FnMut(&[f64]) -> f64,
) -> f64 {
    assert_eq!(x.len(), analytic.len());
    let mut work = x.to_vec();
    let all: Vec<usize> = (0..x.len()).collect();
    let coords = coords.unwrap_or(&all);
    coords
        .iter()
        .map(|&i| relative_error(analytic[i], central_difference(&mut work, i, &mut f)))
        .fold(0.0, f64::max)
}

/// `sum(out * probe)`, the scalar whose gradient w.r.t. `out` is `probe`.
pub fn probe_loss(out: &Tensor, probe: &Tensor) -> f64 {
    out.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
}

// ---------------------------------------------------------------------------
// Scalar convolution oracle

/// Zero-padded 3x3 cross-correlation with explicit loops.
pub fn conv_oracle(input: &Tensor, weights: &Tensor, stride: usize) -> Tensor {
    let s = input.shape();
    let (b, c, h, w) = (s[0], s[1], s[2], s[3]);
    let k = weights.shape()[0];
    let (ho, wo) = (h.div_ceil(stride), w.div_ceil(stride));
    let x = input.data();
    let wt = weights.data();
    let mut out = vec![0.0; b * k * ho * wo];
    for bi in 0..b {
        for ko in 0..k {
            for i in 0..ho {
                for j in 0..wo {
                    let mut acc = 0.0;
                    for ci in 0..c {
                        for di in 0..3 {
                            for dj in 0..3 {
                                let r = (i * stride + di) as isize - 1;
                                let q = (j * stride + dj) as isize - 1;
                                if r < 0 || q < 0 || r >= h as isize || q >= w as isize {
                                    continue;
                                }
                                acc += x[((bi * c + ci) * h + r as usize) * w + q as usize]
                                    * wt[((ko * c + ci) * 3 + di) * 3 + dj];
                            }
                        }
                    }
                    out[((bi * k + ko) * ho + i) * wo + j] = acc;
                }
            }
        }
    }
    Tensor::new(&[b, k, ho, wo], out).unwrap()
}

// ---------------------------------------------------------------------------
// Scalar encoding oracle

/// Straight-line reimplementation of the encoding: pooled min-max to
/// [0, 255], rows = frames, columns = part-ordered joints, bilinear resize
/// with half-pixel centers, then round-half-away-from-zero.
pub fn encode_oracle(seq: &SkeletonSequence, parts: &[Vec<usize>; 5]) -> Vec<u8> {
    const OUT: usize = 40;
    let frames = seq.frames();
    let n = frames.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for f in frames {
        for j in &f.joints {
            for v in [j.x, j.y, j.z] {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    let mut columns: Vec<usize> = Vec::new();
    for p in parts {
        let mut sorted = p.clone();
        sorted.sort();
        columns.extend(sorted);
    }
    let k = columns.len();
    let norm = |v: f64| if hi > lo { 255.0 * ((v - lo) / (hi - lo)) } else { 0.0 };
    let pixel = |r: usize, c: usize, ch: usize| -> f64 {
        let j = &frames[r].joints[columns[c]];
        norm([j.x, j.y, j.z][ch])
    };

    let axis = |i: usize, len_in: usize| -> (usize, usize, f64) {
        let mut src = (i as f64 + 0.5) * (len_in as f64 / OUT as f64) - 0.5;
        if src < 0.0 {
            src = 0.0;
        }
        let mut a = src.floor() as usize;
        if a > len_in - 1 {
            a = len_in - 1;
        }
        let b = if a + 1 < len_in { a + 1 } else { len_in - 1 };
        (a, b, src - a as f64)
    };

    let mut out = Vec::with_capacity(OUT * OUT * 3);
    for i in 0..OUT {
        let (r0, r1, ty) = axis(i, n);
        for j in 0..OUT {
            let (c0, c1, tx) = axis(j, k);
            for ch in 0..3 {
                let top = pixel(r0, c0, ch) + tx * (pixel(r0, c1, ch) - pixel(r0, c0, ch));
                let bottom = pixel(r1, c0, ch) + tx * (pixel(r1, c1, ch) - pixel(r1, c0, ch));
                let v = (top + ty * (bottom - top)).clamp(0.0, 255.0);
                let rounded = if v - v.floor() >= 0.5 { v.floor() + 1.0 } else { v.floor() };
                out.push(rounded.min(255.0) as u8);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Fixtures

pub fn random_sequence(rng: &mut ChaCha8Rng, dataset: DatasetId, n: usize, k: usize) -> SkeletonSequence {
    let scale = rng.random_range(0.1..5.0);
    let shift = rng.random_range(-3.0..3.0);
    let frames = (0..n)
        .map(|_| {
            SkeletonFrame::new(
                (0..k)
                    .map(|_| {
                        Joint::new(
                            shift + scale * rng.random_range(-1.0..1.0),
                            shift + scale * rng.random_range(-1.0..1.0),
                            shift + scale * rng.random_range(-1.0..1.0),
                        )
                    })
                    .collect(),
            )
        })
        .collect();
    let id = SequenceId::new(dataset, rng.random_range(1..=18), rng.random_range(1..=10), 1).unwrap();
    SkeletonSequence::new(id, frames).unwrap()
}

pub fn default_part_map(k: usize) -> PartMap {
    match k {
        20 => PartMap::default_for(DatasetId::Msr3d),
        15 => PartMap::default_for(DatasetId::Kard),
        _ => panic!("no default part map for {k} joints"),
    }
}

/// Writes one raw skeleton file in the layout's text format.
pub fn write_raw_sequence(dir: &Path, layout: &CorpusLayout, seq: &SkeletonSequence) {
    let mut text = String::new();
    for f in seq.frames() {
        for j in &f.joints {
            if layout.values_per_row == 4 {
                text.push_str(&format!("{} {} {} 1\n", j.x, j.y, j.z));
            } else {
                text.push_str(&format!("{} {} {}\n", j.x, j.y, j.z));
            }
        }
    }
    std::fs::write(dir.join(layout.file_name(&seq.id())), text).unwrap();
}

/// Synthetic sequence whose motion depends on the action, so encoded images
/// are learnable: joint `j` oscillates with an action-specific frequency and
/// phase, plus subject-dependent offsets and noise.
pub fn synthetic_sequence(rng: &mut ChaCha8Rng, id: SequenceId, joints: usize, frames: usize) -> SkeletonSequence {
    let a = id.action as f64;
    let s = id.subject as f64;
    let frames = (0..frames)
        .map(|t| {
            let t = t as f64 / 8.0;
            SkeletonFrame::new(
                (0..joints)
                    .map(|j| {
                        let jf = j as f64;
                        let phase = 0.37 * a * jf;
                        Joint::new(
                            (0.3 * a * t + phase).sin() + 0.05 * s + 0.02 * rng.random_range(-1.0..1.0),
                            (0.17 * (a + jf) * t).cos() + 0.03 * s + 0.02 * rng.random_range(-1.0..1.0),
                            2.0 + 0.1 * (a * 0.5 + jf).sin() * t + 0.02 * rng.random_range(-1.0..1.0),
                        )
                    })
                    .collect(),
            )
        })
        .collect();
    SkeletonSequence::new(id, frames).unwrap()
}

/// Synthetic corpus covering every action, subject and episode of a dataset.
pub fn synthetic_corpus(dataset: DatasetId, actions: &[u8], subjects: &[u8], episodes: u16, seed: u64) -> Vec<SkeletonSequence> {
    let mut r = rng(seed);
    let k = dataset.default_joint_count();
    let mut out = Vec::new();
    for &a in actions {
        for &s in subjects {
            for e in 1..=episodes {
                let id = SequenceId::new(dataset, a, s, e).unwrap();
                let n = r.random_range(12..30);
                out.push(synthetic_sequence(&mut r, id, k, n));
            }
        }
    }
    out
}

/// `count` 32x32 images per class. Each class has a random prototype; samples
/// add small bounded noise, so classes are linearly separable.
pub fn separable_images(classes: usize, per_class: usize, seed: u64) -> LabeledImages {
    let mut r = rng(seed);
    let prototypes: Vec<Vec<u8>> = (0..classes)
        .map(|_| (0..32 * 32 * 3).map(|_| r.random_range(40..216)).collect())
        .collect();
    let mut data = LabeledImages::default();
    for i in 0..classes * per_class {
        let class = i % classes;
        let pixels = prototypes[class]
            .iter()
            .map(|&p| (p as i32 + r.random_range(-24..=24)) as u8)
            .collect();
        data.push(Image::new(32, 32, pixels).unwrap(), class);
    }
    data
}
