use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetId, Experiment, SequenceId, SkeletonSequence, Subset};
use crate::error::{Error, Result};

/// Training subjects of the MSR Action 3D cross-subject protocol.
pub const DEFAULT_TRAINING_SUBJECTS: [u8; 5] = [1, 3, 5, 7, 9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitRule {
    CrossSubject {
        training_subjects: BTreeSet<u8>,
    },
    /// Class-stratified random partition, repeated `repeats` times.
    FractionalRandom {
        train_fraction: f64,
        repeats: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub subset: Subset,
    pub experiment: Option<Experiment>,
    pub split_rule: SplitRule,
}

impl ProtocolSpec {
    pub fn cross_subject(subset: Subset) -> Self {
        Self {
            subset,
            experiment: None,
            split_rule: SplitRule::CrossSubject {
                training_subjects: DEFAULT_TRAINING_SUBJECTS.into_iter().collect(),
            },
        }
    }

    pub fn kard_experiment(subset: Subset, experiment: Experiment, repeats: usize, seed: u64) -> Self {
        Self {
            subset,
            experiment: Some(experiment),
            split_rule: SplitRule::FractionalRandom {
                train_fraction: experiment.train_fraction(),
                repeats,
                seed,
            },
        }
    }

    pub fn dataset(&self) -> DatasetId {
        self.subset.dataset()
    }

    /// Short label such as `AS1` or `ActivitySet2/B`.
    pub fn label(&self) -> String {
        match self.experiment {
            Some(e) => format!("{}/{}", self.subset, e),
            None => self.subset.to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.split_rule, self.experiment) {
            (SplitRule::CrossSubject { training_subjects }, None) => {
                if training_subjects.is_empty() {
                    return Err(Error::Config("cross-subject split needs training subjects".into()));
                }
                Ok(())
            }
            (SplitRule::CrossSubject { .. }, Some(_)) => Err(Error::Config(
                "experiments A/B/C use fractional random splits".into(),
            )),
            (
                SplitRule::FractionalRandom {
                    train_fraction,
                    repeats,
                    ..
                },
                experiment,
            ) => {
                if !(*train_fraction > 0.0 && *train_fraction < 1.0) {
                    return Err(Error::Config(format!(
                        "train fraction {train_fraction} must lie strictly between 0 and 1"
                    )));
                }
                if *repeats == 0 {
                    return Err(Error::Config("repeats must be >= 1".into()));
                }
                if let Some(e) = experiment {
                    if self.dataset() != DatasetId::Kard {
                        return Err(Error::Config("experiments A/B/C are KARD-only".into()));
                    }
                    if (e.train_fraction() - train_fraction).abs() > 1e-12 {
                        return Err(Error::Config(format!(
                            "experiment {e} requires train fraction {}, got {train_fraction}",
                            e.train_fraction()
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_ids: BTreeSet<SequenceId>,
    pub test_ids: BTreeSet<SequenceId>,
}

impl Split {
    pub fn is_disjoint(&self) -> bool {
        self.train_ids.is_disjoint(&self.test_ids)
    }
}

/// Materializes a protocol as explicit train/test partitions of the
/// sequences in `corpus` that belong to the protocol's subset.
pub fn make_split(corpus: &[SkeletonSequence], proto: &ProtocolSpec) -> Result<Vec<Split>> {
    if corpus.is_empty() {
        return Err(Error::Data("empty corpus".into()));
    }
    proto.validate()?;
    let subset = proto.subset;

    let mut by_class: BTreeMap<u8, Vec<SequenceId>> = BTreeMap::new();
    for seq in corpus {
        let id = seq.id();
        if id.dataset == subset.dataset() && subset.contains(id.action) {
            by_class.entry(id.action).or_default().push(id);
        }
    }
    for (action, label) in subset.entries() {
        if !by_class.contains_key(action) {
            return Err(Error::Data(format!(
                "{subset}: action {action} ({label}) absent from corpus"
            )));
        }
    }
    for ids in by_class.values_mut() {
        ids.sort_unstable();
    }

    match &proto.split_rule {
        SplitRule::CrossSubject { training_subjects } => {
            let (train_ids, test_ids): (BTreeSet<_>, BTreeSet<_>) = by_class
                .values()
                .flatten()
                .partition(|id| training_subjects.contains(&id.subject));
            if train_ids.is_empty() || test_ids.is_empty() {
                return Err(Error::Data(format!(
                    "{subset}: cross-subject split leaves an empty side ({} train, {} test)",
                    train_ids.len(),
                    test_ids.len()
                )));
            }
            Ok(vec![Split {
                train_ids,
                test_ids,
            }])
        }
        SplitRule::FractionalRandom {
            train_fraction,
            repeats,
            seed,
        } => {
            if let Some((action, ids)) = by_class.iter().find(|(_, ids)| ids.len() < 2) {
                return Err(Error::Data(format!(
                    "{subset}: action {action} has {} sequence(s); stratified split needs >= 2",
                    ids.len()
                )));
            }
            let splits = (0..*repeats)
                .map(|repeat| {
                    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                    rng.set_stream(repeat as u64);
                    let mut split = Split {
                        train_ids: BTreeSet::new(),
                        test_ids: BTreeSet::new(),
                    };
                    for ids in by_class.values() {
                        let mut ids = ids.clone();
                        ids.shuffle(&mut rng);
                        let n_train = stratum_train_count(ids.len(), *train_fraction);
                        split.train_ids.extend(&ids[..n_train]);
                        split.test_ids.extend(&ids[n_train..]);
                    }
                    split
                })
                .collect();
            Ok(splits)
        }
    }
}

/// Rounded share of a class used for training, keeping both sides non-empty.
fn stratum_train_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).clamp(1, n - 1)
}
