//! Skeleton datasets: domain types, corpus parsing and evaluation splits.

mod catalog;
mod parse;
mod split;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use catalog::{action_name, Experiment, Subset, KARD_ACTIONS, MSR3D_ACTIONS};
pub use parse::{
    parse_corpus, parse_corpus_excluding, read_canonical, read_exclusion_list, validity_filter,
    write_canonical, CorpusLayout, Diagnostic, ParseReport, ParsedCorpus,
};
pub use split::{make_split, ProtocolSpec, Split, SplitRule, DEFAULT_TRAINING_SUBJECTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetId {
    Msr3d,
    Kard,
}

impl DatasetId {
    /// Joints per frame in the sensor's skeleton format.
    pub fn default_joint_count(self) -> usize {
        match self {
            DatasetId::Msr3d => 20,
            DatasetId::Kard => 15,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetId::Msr3d => "msr3d",
            DatasetId::Kard => "kard",
        }
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "msr3d" => Ok(DatasetId::Msr3d),
            "kard" => Ok(DatasetId::Kard),
            _ => Err(Error::Config(format!(
                "unknown dataset '{s}' (expected msr3d|kard)"
            ))),
        }
    }
}

/// Identifies a sequence within a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SequenceId {
    pub dataset: DatasetId,
    pub action: u8,
    pub subject: u8,
    pub episode: u16,
}

impl SequenceId {
    pub fn new(dataset: DatasetId, action: u8, subject: u8, episode: u16) -> Result<Self> {
        if !(1..=10).contains(&subject) {
            return Err(Error::Data(format!("subject id {subject} outside 1..=10")));
        }
        if episode == 0 {
            return Err(Error::Data("episode id must be >= 1".into()));
        }
        if action == 0 {
            return Err(Error::Data("action id must be >= 1".into()));
        }
        Ok(Self {
            dataset,
            action,
            subject,
            episode,
        })
    }

    /// Parses the `aAA_sSS_eEE` stem, ignoring anything after it.
    pub fn parse_stem(dataset: DatasetId, text: &str) -> Option<Self> {
        let text = text.trim();
        let text = text
            .split_once(':')
            .map(|(_, rest)| rest)
            .unwrap_or(text);
        let mut parts = text.splitn(4, '_');
        let a = parts.next()?.strip_prefix('a')?;
        let s = parts.next()?.strip_prefix('s')?;
        let e = parts.next()?.strip_prefix('e')?;
        let all_digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
        if !(all_digits(a) && all_digits(s) && all_digits(e)) {
            return None;
        }
        Self::new(dataset, a.parse().ok()?, s.parse().ok()?, e.parse().ok()?).ok()
    }

    pub fn stem(&self) -> String {
        format!("a{:02}_s{:02}_e{:02}", self.action, self.subject, self.episode)
    }
}

impl fmt::Display for SequenceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.dataset, self.stem())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Joint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub confidence: Option<f64>,
}

impl Joint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self {
            x,
            y,
            z,
            confidence: None,
        }
    }

    pub fn coords(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn is_origin(&self) -> bool {
        self.x == 0.0 && self.y == 0.0 && self.z == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonFrame {
    pub joints: Vec<Joint>,
}

impl SkeletonFrame {
    pub fn new(joints: Vec<Joint>) -> Self {
        Self { joints }
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }
}

/// A time-ordered, labelled list of skeleton frames.
///
/// Construction checks that there is at least one frame, that every frame
/// has the same joint count and that all coordinates are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    id: SequenceId,
    frames: Vec<SkeletonFrame>,
}

impl SkeletonSequence {
    pub fn new(id: SequenceId, frames: Vec<SkeletonFrame>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Data(format!("{id}: sequence has no frames")))?;
        let k = first.joint_count();
        if k == 0 {
            return Err(Error::Data(format!("{id}: frames have no joints")));
        }
        for (t, frame) in frames.iter().enumerate() {
            if frame.joint_count() != k {
                return Err(Error::Data(format!(
                    "{id}: frame {t} has {} joints, expected {k}",
                    frame.joint_count()
                )));
            }
            if let Some(j) = frame.joints.iter().position(|j| !j.is_finite()) {
                return Err(Error::Data(format!(
                    "{id}: non-finite coordinate at frame {t}, joint {j}"
                )));
            }
        }
        Ok(Self { id, frames })
    }

    pub fn id(&self) -> SequenceId {
        self.id
    }

    pub fn frames(&self) -> &[SkeletonFrame] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn joint_count(&self) -> usize {
        self.frames[0].joint_count()
    }

    /// Applies `f` to every coordinate, keeping labels.
    pub fn map_coords(&self, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        let frames = self
            .frames
            .iter()
            .map(|fr| {
                SkeletonFrame::new(
                    fr.joints
                        .iter()
                        .map(|j| Joint {
                            x: f(j.x),
                            y: f(j.y),
                            z: f(j.z),
                            confidence: j.confidence,
                        })
                        .collect(),
                )
            })
            .collect();
        Self::new(self.id, frames)
    }
}
