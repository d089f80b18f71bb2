use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{evaluate, train, write_atomic, EpochStats, LabeledImages, TrainConfig};
use crate::augment::{augment_all_tagged, eval_view};
use crate::dataset::{make_split, ProtocolSpec, SequenceId, SkeletonSequence, Split};
use crate::encoder::{encode, PartMap};
use crate::error::{Error, Result};
use crate::raster::Image;
use crate::resnet::{ResNet, ResNetConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub learning_rate: f64,
    pub loss: f64,
    pub train_error: f64,
    pub test_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Failed { split: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub protocol: ProtocolSpec,
    pub model_depth: usize,
    pub seed: u64,
    pub class_labels: Vec<String>,
    pub per_split_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    /// Summed over splits; `confusion_matrix[true][predicted]`.
    pub confusion_matrix: Vec<Vec<u64>>,
    pub curves: Vec<Vec<CurvePoint>>,
    /// Relative to the experiment directory.
    pub checkpoints: Vec<String>,
    pub status: RunStatus,
}

impl ExperimentResult {
    /// Directory-safe identifier such as `msr3d_AS1_d20`.
    pub fn slug(&self) -> String {
        experiment_slug(&self.protocol, self.model_depth)
    }

    pub fn test_count(&self) -> u64 {
        self.confusion_matrix.iter().flatten().sum()
    }
}

pub fn experiment_slug(proto: &ProtocolSpec, depth: usize) -> String {
    let mut s = format!("{}_{}", proto.dataset(), proto.subset);
    if let Some(e) = proto.experiment {
        s.push_str(&format!("_{e}"));
    }
    format!("{s}_d{depth}")
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone)]
pub struct ProtocolOptions {
    pub part_map: PartMap,
    /// Where checkpoints and result files go; nothing is written when unset.
    pub out_dir: Option<PathBuf>,
    pub test_curve: bool,
}

/// Training and test images for one split, with the sequence each image
/// came from.
#[derive(Debug, Clone, Default)]
pub struct SplitData {
    pub train: LabeledImages,
    pub train_sources: Vec<SequenceId>,
    pub test: LabeledImages,
    pub test_sources: Vec<SequenceId>,
}

impl SplitData {
    /// Fails if any sequence contributes images to both sides.
    pub fn check_no_leakage(&self) -> Result<()> {
        let train: BTreeSet<_> = self.train_sources.iter().collect();
        if let Some(id) = self.test_sources.iter().find(|id| train.contains(id)) {
            return Err(Error::Data(format!("sequence {id} reaches both training and evaluation")));
        }
        Ok(())
    }
}

/// Encodes every sequence once, keyed by identifier.
pub fn encode_corpus(corpus: &[SkeletonSequence], part_map: &PartMap) -> Result<BTreeMap<SequenceId, Image>> {
    corpus
        .iter()
        .map(|s| Ok((s.id(), encode(s, part_map)?)))
        .collect()
}

/// Augmented training views and center-crop test views for one split.
pub fn split_data(
    encoded: &BTreeMap<SequenceId, Image>,
    proto: &ProtocolSpec,
    split: &Split,
    train_config: &TrainConfig,
) -> Result<SplitData> {
    let lookup = |id: &SequenceId| -> Result<(&Image, usize)> {
        let img = encoded
            .get(id)
            .ok_or_else(|| Error::Data(format!("sequence {id} was not encoded")))?;
        let class = proto
            .subset
            .class_of(id.action)
            .ok_or_else(|| Error::Data(format!("sequence {id} is outside subset {}", proto.subset)))?;
        Ok((img, class))
    };
    let mut data = SplitData::default();
    for (index, id) in split.train_ids.iter().enumerate() {
        let (img, class) = lookup(id)?;
        for (_, view) in augment_all_tagged(img, &train_config.augment_policy, index as u64)? {
            data.train.push(view, class);
            data.train_sources.push(*id);
        }
    }
    for id in &split.test_ids {
        let (img, class) = lookup(id)?;
        data.test.push(eval_view(img)?, class);
        data.test_sources.push(*id);
    }
    data.check_no_leakage()?;
    Ok(data)
}

/// Trains and evaluates a fresh model on every split of `proto`.
///
/// Split `i` uses seed `train_config.seed + i` for both initialization and
/// batch order. With an output directory, each split's checkpoint and the
/// running result are persisted as they complete; a failing split leaves a
/// result file marked as failed.
pub fn run_protocol(
    corpus: &[SkeletonSequence],
    proto: &ProtocolSpec,
    depth: usize,
    train_config: &TrainConfig,
    options: &ProtocolOptions,
) -> Result<ExperimentResult> {
    proto.validate()?;
    train_config.validate()?;
    let classes = proto.subset.action_ids().len();
    ResNetConfig::new(depth, classes, 0).validate()?;
    let started = Instant::now();

    let splits = make_split(corpus, proto)?;
    let members: Vec<SkeletonSequence> = corpus
        .iter()
        .filter(|s| s.id().dataset == proto.dataset() && proto.subset.contains(s.id().action))
        .cloned()
        .collect();
    let encoded = encode_corpus(&members, &options.part_map)?;

    let exp_dir = options
        .out_dir
        .as_ref()
        .map(|d| d.join(experiment_slug(proto, depth)));
    if let Some(dir) = &exp_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut result = ExperimentResult {
        protocol: proto.clone(),
        model_depth: depth,
        seed: train_config.seed,
        class_labels: proto.subset.labels().iter().map(|s| s.to_string()).collect(),
        per_split_accuracy: Vec::new(),
        mean_accuracy: 0.0,
        confusion_matrix: vec![vec![0; classes]; classes],
        curves: Vec::new(),
        checkpoints: Vec::new(),
        status: RunStatus::Complete,
    };

    for (i, split) in splits.iter().enumerate() {
        let outcome = run_split(&encoded, proto, split, i, depth, train_config, options, exp_dir.as_deref());
        match outcome {
            Ok((accuracy, confusion, curve, ckpt)) => {
                result.per_split_accuracy.push(accuracy);
                for (row, add) in result.confusion_matrix.iter_mut().zip(confusion) {
                    row.iter_mut().zip(add).for_each(|(a, b)| *a += b);
                }
                result.curves.push(curve);
                result.checkpoints.extend(ckpt);
                result.mean_accuracy = mean(&result.per_split_accuracy);
            }
            Err(e) => {
                result.status = RunStatus::Failed {
                    split: i,
                    message: e.to_string(),
                };
                if let Some(dir) = &exp_dir {
                    persist(&result, dir, started)?;
                }
                return Err(e);
            }
        }
        if let Some(dir) = &exp_dir {
            persist(&result, dir, started)?;
        }
    }
    Ok(result)
}

type SplitOutcome = (f64, Vec<Vec<u64>>, Vec<CurvePoint>, Option<String>);

#[allow(clippy::too_many_arguments)]
fn run_split(
    encoded: &BTreeMap<SequenceId, Image>,
    proto: &ProtocolSpec,
    split: &Split,
    index: usize,
    depth: usize,
    train_config: &TrainConfig,
    options: &ProtocolOptions,
    exp_dir: Option<&Path>,
) -> Result<SplitOutcome> {
    let data = split_data(encoded, proto, split, train_config)?;
    let seed = train_config.seed.wrapping_add(index as u64);
    let classes = proto.subset.action_ids().len();
    let mut model = ResNet::build(ResNetConfig::new(depth, classes, seed))?;
    let config = TrainConfig {
        seed,
        ..train_config.clone()
    };
    let mut curve = Vec::with_capacity(config.epochs);
    let test = &data.test;
    let history: Vec<EpochStats> = train(&mut model, &data.train, &config, &mut |m, stats| {
        let test_error = if options.test_curve {
            Some(100.0 - evaluate(m, test)?.accuracy)
        } else {
            None
        };
        curve.push(CurvePoint {
            epoch: stats.epoch,
            learning_rate: stats.learning_rate,
            loss: stats.mean_loss,
            train_error: stats.train_error,
            test_error,
        });
        Ok(ControlFlow::Continue(()))
    })?;
    debug_assert_eq!(history.len(), curve.len());
    let eval = evaluate(&mut model, test)?;
    let ckpt = match exp_dir {
        Some(dir) => {
            let name = format!("split{index}.ckpt");
            let mut ck = model.to_checkpoint();
            ck.meta.insert("classes".into(), join_ids(&proto.subset.action_ids()));
            ck.meta.insert("dataset".into(), proto.dataset().to_string());
            ck.save(&dir.join(&name))?;
            Some(name)
        }
        None => None,
    };
    Ok((eval.accuracy, eval.confusion, curve, ckpt))
}

fn join_ids(ids: &[u8]) -> String {
    ids.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
}

pub const RESULT_FILE: &str = "result.json";
pub const RUNTIME_FILE: &str = "runtime.json";
pub const CURVES_FILE: &str = "curves.csv";

/// Writes the result, learning curves and wall-clock runtime. Runtime lives
/// in its own file so the result file stays reproducible byte for byte.
fn persist(result: &ExperimentResult, dir: &Path, started: Instant) -> Result<()> {
    write_atomic(&dir.join(RESULT_FILE), result_json(result).as_bytes())?;
    write_atomic(&dir.join(CURVES_FILE), curves_csv(result).as_bytes())?;
    let runtime = serde_json::json!({ "runtime_seconds": started.elapsed().as_secs_f64() });
    write_atomic(&dir.join(RUNTIME_FILE), format!("{runtime:#}\n").as_bytes())
}

pub fn result_json(result: &ExperimentResult) -> String {
    serde_json::to_string_pretty(result).expect("results serialize") + "\n"
}

pub fn load_result(path: &Path) -> Result<ExperimentResult> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// One row per split and epoch.
pub fn curves_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("split,epoch,learning_rate,loss,train_error,test_error\n");
    for (s, curve) in result.curves.iter().enumerate() {
        for p in curve {
            let test = p.test_error.map(|t| t.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{s},{},{},{},{},{test}\n",
                p.epoch, p.learning_rate, p.loss, p.train_error
            ));
        }
    }
    out
}
