use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentPolicy;
use crate::dataset::DEFAULT_TRAINING_SUBJECTS;
use crate::error::{Error, Result};

/// Learning rate in force from `epoch_fraction` of the run onwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrStep {
    pub epoch_fraction: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_schedule: Vec<LrStep>,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub augment_policy: AugmentPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 160,
            batch_size: 128,
            lr_schedule: vec![
                LrStep { epoch_fraction: 0.0, learning_rate: 0.1 },
                LrStep { epoch_fraction: 0.5, learning_rate: 0.01 },
                LrStep { epoch_fraction: 0.75, learning_rate: 0.001 },
            ],
            momentum: 0.9,
            weight_decay: 1e-4,
            seed: 0,
            augment_policy: AugmentPolicy::full(),
        }
    }
}

impl TrainConfig {
    pub fn constant_lr(lr: f64) -> Vec<LrStep> {
        vec![LrStep { epoch_fraction: 0.0, learning_rate: lr }]
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        let Some(first) = self.lr_schedule.first() else {
            return Err(Error::Config("learning-rate schedule is empty".into()));
        };
        if first.epoch_fraction != 0.0 {
            return Err(Error::Config("learning-rate schedule must start at epoch fraction 0".into()));
        }
        for pair in self.lr_schedule.windows(2) {
            if pair[1].epoch_fraction <= pair[0].epoch_fraction {
                return Err(Error::Config("epoch fractions must be strictly increasing".into()));
            }
        }
        for step in &self.lr_schedule {
            if !(0.0..=1.0).contains(&step.epoch_fraction) {
                return Err(Error::Config(format!(
                    "epoch fraction {} outside [0, 1]",
                    step.epoch_fraction
                )));
            }
            if !(step.learning_rate >= 0.0 && step.learning_rate.is_finite()) {
                return Err(Error::Config(format!(
                    "learning rate {} must be finite and non-negative",
                    step.learning_rate
                )));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) || self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::Config("momentum must lie in [0, 1) and weight decay be >= 0".into()));
        }
        self.augment_policy.validate()
    }

    /// Learning rate for the zero-based `epoch`.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        let fraction = epoch as f64 / self.epochs as f64;
        self.lr_schedule
            .iter()
            .take_while(|s| s.epoch_fraction <= fraction)
            .last()
            .or(self.lr_schedule.first())
            .map_or(0.0, |s| s.learning_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitOptions {
    pub training_subjects: BTreeSet<u8>,
    pub kard_repeats: usize,
    pub split_seed: u64,
}

impl Default for SplitOptions {
    fn default() -> Self {
        Self {
            training_subjects: DEFAULT_TRAINING_SUBJECTS.into_iter().collect(),
            kard_repeats: 10,
            split_seed: 0,
        }
    }
}

/// Everything a run reads from its JSON configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub depth: usize,
    pub train: TrainConfig,
    pub split: SplitOptions,
    pub part_map: Option<PathBuf>,
    pub exclusion_list: Option<PathBuf>,
    /// Record test error after every epoch.
    pub test_curve: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            depth: 20,
            train: TrainConfig::default(),
            split: SplitOptions::default(),
            part_map: None,
            exclusion_list: None,
            test_curve: true,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!(c.learning_rate(0), 0.1);
        assert_eq!(c.learning_rate(79), 0.1);
        assert_eq!(c.learning_rate(80), 0.01);
        assert_eq!(c.learning_rate(120), 0.001);
        assert_eq!(c.learning_rate(159), 0.001);
    }

    #[test]
    fn rejects_bad_schedules() {
        let mut c = TrainConfig::default();
        c.lr_schedule.swap(1, 2);
        assert!(c.validate().is_err());
        c.lr_schedule = vec![LrStep { epoch_fraction: 0.2, learning_rate: 0.1 }];
        assert!(c.validate().is_err());
        c.lr_schedule = TrainConfig::constant_lr(-1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn partial_json_uses_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"depth": 32, "train": {"epochs": 5}}"#).unwrap();
        assert_eq!(c.depth, 32);
        assert_eq!(c.train.epochs, 5);
        assert_eq!(c.train.batch_size, 128);
        assert_eq!(c.split.kard_repeats, 10);
        let back: RunConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }
}
