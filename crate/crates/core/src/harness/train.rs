use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::nn::{softmax_cross_entropy, Mode, Sgd, Tensor};
use crate::raster::{Image, CHANNELS};
use crate::resnet::ResNet;

/// Images paired with zero-based class labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledImages {
    pub images: Vec<Image>,
    pub labels: Vec<usize>,
}

impl LabeledImages {
    pub fn new(images: Vec<Image>, labels: Vec<usize>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        Ok(Self { images, labels })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn push(&mut self, image: Image, label: usize) {
        self.images.push(image);
        self.labels.push(label);
    }
}

/// Stacks images into a `[B, 3, H, W]` tensor scaled to `[0, 1]`.
pub fn batch_tensor(images: &[&Image]) -> Result<Tensor> {
    let first = images
        .first()
        .ok_or_else(|| Error::Data("empty batch".into()))?;
    let (h, w) = (first.height(), first.width());
    let mut data = Vec::with_capacity(images.len() * CHANNELS * h * w);
    for img in images {
        img.ensure_size(h, w)?;
        data.extend(img.to_planar_unit());
    }
    Tensor::new(&[images.len(), CHANNELS, h, w], data)
}

/// Index of the largest logit; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    pub mean_loss: f64,
    /// Top-1 error in percent over the epoch's training mini-batches.
    pub train_error: f64,
}

pub type EpochHook<'a> = dyn FnMut(&mut ResNet, &EpochStats) -> Result<ControlFlow<()>> + 'a;

/// Mini-batch SGD with cross-entropy loss. The hook runs after each epoch
/// and may stop training early.
pub fn train(
    model: &mut ResNet,
    data: &LabeledImages,
    config: &TrainConfig,
    hook: &mut EpochHook<'_>,
) -> Result<Vec<EpochStats>> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    let classes = model.num_classes();
    if let Some(&bad) = data.labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Data(format!("label {bad} out of range for {classes} classes")));
    }
    let mut seen = vec![false; classes];
    data.labels.iter().for_each(|&l| seen[l] = true);
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::Data(format!("class {missing} has no training samples")));
    }

    let sgd = Sgd {
        momentum: config.momentum,
        weight_decay: config.weight_decay,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    model.zero_grad();

    for epoch in 0..config.epochs {
        let lr = config.learning_rate(epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut wrong = 0usize;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let images: Vec<&Image> = idx.iter().map(|&i| &data.images[i]).collect();
            let labels: Vec<usize> = idx.iter().map(|&i| data.labels[i]).collect();
            let input = batch_tensor(&images)?;
            let logits = model.forward(&input, Mode::Train)?;
            let (loss, grad) = softmax_cross_entropy(&logits, &labels)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch,
                    message: format!("loss is {loss}"),
                });
            }
            loss_sum += loss * idx.len() as f64;
            wrong += logits
                .data()
                .chunks_exact(classes)
                .zip(&labels)
                .filter(|(row, &l)| argmax(row) != l)
                .count();
            model.backward(&grad)?;
            sgd.step(model.parameters_mut(), lr).map_err(|e| Error::Divergence {
                epoch,
                batch,
                message: e.to_string(),
            })?;
        }
        let stats = EpochStats {
            epoch,
            learning_rate: lr,
            mean_loss: loss_sum / data.len() as f64,
            train_error: 100.0 * wrong as f64 / data.len() as f64,
        };
        history.push(stats);
        if hook(model, &stats)?.is_break() {
            break;
        }
    }
    Ok(history)
}

pub fn train_plain(model: &mut ResNet, data: &LabeledImages, config: &TrainConfig) -> Result<Vec<EpochStats>> {
    train(model, data, config, &mut |_, _| Ok(ControlFlow::Continue(())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub predictions: Vec<usize>,
}

const EVAL_BATCH: usize = 100;

pub fn predict(model: &mut ResNet, images: &[Image]) -> Result<Vec<usize>> {
    let classes = model.num_classes();
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(EVAL_BATCH) {
        let refs: Vec<&Image> = chunk.iter().collect();
        let logits = model.forward(&batch_tensor(&refs)?, Mode::Eval)?;
        out.extend(logits.data().chunks_exact(classes).map(argmax));
    }
    Ok(out)
}

/// Eval-mode accuracy (percent) and confusion matrix.
pub fn evaluate(model: &mut ResNet, data: &LabeledImages) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::Data("empty test set".into()));
    }
    let classes = model.num_classes();
    if let Some(&bad) = data.labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Data(format!("label {bad} out of range for {classes} classes")));
    }
    let predictions = predict(model, &data.images)?;
    Ok(score(&predictions, &data.labels, classes))
}

pub fn score(predictions: &[usize], labels: &[usize], classes: usize) -> Evaluation {
    let mut confusion = vec![vec![0u64; classes]; classes];
    for (&p, &l) in predictions.iter().zip(labels) {
        confusion[l][p] += 1;
    }
    let correct = (0..classes).map(|c| confusion[c][c] as usize).sum();
    Evaluation {
        accuracy: 100.0 * correct as f64 / labels.len() as f64,
        correct,
        total: labels.len(),
        confusion,
        predictions: predictions.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_pick_lowest() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0]), 0);
        assert_eq!(argmax(&[-1.0, -0.5, -2.0]), 1);
    }

    #[test]
    fn three_of_four() {
        let e = score(&[0, 1, 1, 1], &[0, 1, 0, 1], 2);
        assert_eq!(e.accuracy, 75.0);
        assert_eq!(e.confusion, vec![vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn all_correct_is_diagonal() {
        let labels = [0, 2, 1, 2];
        let e = score(&labels, &labels, 3);
        assert_eq!(e.accuracy, 100.0);
        for (i, row) in e.confusion.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v == 0, i != j || labels.iter().all(|&l| l != i));
            }
        }
    }
}
