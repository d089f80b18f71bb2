//! Action catalogues and the published action subsets of both datasets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DatasetId;
use crate::error::Error;

/// MSR Action 3D action names, indexed by `action_id - 1`.
pub const MSR3D_ACTIONS: [&str; 20] = [
    "High arm wave",
    "Horizontal arm wave",
    "Hammer",
    "Hand catch",
    "Forward punch",
    "High throw",
    "Draw x",
    "Draw tick",
    "Draw circle",
    "Hand clap",
    "Two hand wave",
    "Side-boxing",
    "Bend",
    "Forward kick",
    "Side kick",
    "Jogging",
    "Tennis swing",
    "Tennis serve",
    "Golf swing",
    "Pickup & Throw",
];

/// KARD action names, indexed by `action_id - 1`.
pub const KARD_ACTIONS: [&str; 18] = [
    "Horizontal arm wave",
    "High arm wave",
    "Two-hand wave",
    "Catch cap",
    "High throw",
    "Draw X",
    "Draw tick",
    "Toss paper",
    "Forward kick",
    "Side kick",
    "Take umbrella",
    "Bend",
    "Hand clap",
    "Walk",
    "Phone call",
    "Drink",
    "Sit down",
    "Stand up",
];

/// One of the six evaluation subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subset {
    AS1,
    AS2,
    AS3,
    ActivitySet1,
    ActivitySet2,
    ActivitySet3,
}

// (action_id, label as listed in the subset tables)
const AS1: [(u8, &str); 8] = [
    (2, "Horizontal arm wave"),
    (3, "Hammer"),
    (5, "Forward punch"),
    (6, "High throw"),
    (10, "Hand clap"),
    (13, "Bend"),
    (18, "Tennis serve"),
    (20, "Pickup & Throw"),
];
const AS2: [(u8, &str); 8] = [
    (1, "High arm wave"),
    (4, "Hand catch"),
    (7, "Draw x"),
    (8, "Draw tick"),
    (9, "Draw circle"),
    (11, "Two hand wave"),
    (14, "Forward kick"),
    (12, "Side-boxing"),
];
const AS3: [(u8, &str); 8] = [
    (6, "High throw"),
    (14, "Forward kick"),
    (15, "Side kick"),
    (16, "Jogging"),
    (17, "Tennis swing"),
    (18, "Tennis serve"),
    (19, "Golf swing"),
    (20, "Pickup & Throw"),
];
const KARD_SET1: [(u8, &str); 8] = [
    (1, "Horizontal arm wave"),
    (3, "Two-hand wave"),
    (12, "Bend"),
    (15, "Phone call"),
    (18, "Stand up"),
    (9, "Forward kick"),
    (6, "Draw X"),
    (14, "Walk"),
];
const KARD_SET2: [(u8, &str); 8] = [
    (2, "High arm wave"),
    (10, "Side kick"),
    (4, "Catch cap"),
    (7, "Draw tick"),
    (13, "Hand clap"),
    (9, "Forward kick"),
    (12, "Bend"),
    (17, "Sit down"),
];
const KARD_SET3: [(u8, &str); 8] = [
    (7, "Draw tick"),
    (16, "Drink"),
    (17, "Sit down"),
    (15, "Phone call"),
    (11, "Take umbrella"),
    (8, "Toss paper"),
    (5, "High throw"),
    (1, "Horiz. arm wave"),
];

impl Subset {
    pub const MSR3D: [Subset; 3] = [Subset::AS1, Subset::AS2, Subset::AS3];
    pub const KARD: [Subset; 3] = [
        Subset::ActivitySet1,
        Subset::ActivitySet2,
        Subset::ActivitySet3,
    ];

    pub fn dataset(self) -> DatasetId {
        match self {
            Subset::AS1 | Subset::AS2 | Subset::AS3 => DatasetId::Msr3d,
            _ => DatasetId::Kard,
        }
    }

    pub fn all_for(dataset: DatasetId) -> [Subset; 3] {
        match dataset {
            DatasetId::Msr3d => Self::MSR3D,
            DatasetId::Kard => Self::KARD,
        }
    }

    /// Member actions in table order, paired with the label used in the table.
    pub fn entries(self) -> &'static [(u8, &'static str); 8] {
        match self {
            Subset::AS1 => &AS1,
            Subset::AS2 => &AS2,
            Subset::AS3 => &AS3,
            Subset::ActivitySet1 => &KARD_SET1,
            Subset::ActivitySet2 => &KARD_SET2,
            Subset::ActivitySet3 => &KARD_SET3,
        }
    }

    /// Member action ids in table order. The position in this list is the
    /// class index used by the classifier.
    pub fn action_ids(self) -> [u8; 8] {
        self.entries().map(|(id, _)| id)
    }

    pub fn labels(self) -> [&'static str; 8] {
        self.entries().map(|(_, label)| label)
    }

    pub fn class_of(self, action_id: u8) -> Option<usize> {
        self.entries().iter().position(|&(id, _)| id == action_id)
    }

    pub fn contains(self, action_id: u8) -> bool {
        self.class_of(action_id).is_some()
    }

    pub fn name(self) -> &'static str {
        match self {
            Subset::AS1 => "AS1",
            Subset::AS2 => "AS2",
            Subset::AS3 => "AS3",
            Subset::ActivitySet1 => "ActivitySet1",
            Subset::ActivitySet2 => "ActivitySet2",
            Subset::ActivitySet3 => "ActivitySet3",
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "as1" => Ok(Subset::AS1),
            "as2" => Ok(Subset::AS2),
            "as3" => Ok(Subset::AS3),
            "activityset1" | "set1" => Ok(Subset::ActivitySet1),
            "activityset2" | "set2" => Ok(Subset::ActivitySet2),
            "activityset3" | "set3" => Ok(Subset::ActivitySet3),
            _ => Err(Error::Config(format!(
                "unknown subset '{s}' (expected AS1|AS2|AS3|ActivitySet1|ActivitySet2|ActivitySet3)"
            ))),
        }
    }
}

/// KARD experiment, defined by the fraction of data used for training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Experiment {
    A,
    B,
    C,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [Experiment::A, Experiment::B, Experiment::C];

    pub fn train_fraction(self) -> f64 {
        match self {
            Experiment::A => 1.0 / 3.0,
            Experiment::B => 2.0 / 3.0,
            Experiment::C => 0.5,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Experiment::A => "A",
            Experiment::B => "B",
            Experiment::C => "C",
        };
        f.write_str(s)
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Experiment::A),
            "B" | "b" => Ok(Experiment::B),
            "C" | "c" => Ok(Experiment::C),
            _ => Err(Error::Config(format!("unknown experiment '{s}' (expected A|B|C)"))),
        }
    }
}

pub fn action_name(dataset: DatasetId, action_id: u8) -> Option<&'static str> {
    let idx = usize::from(action_id).checked_sub(1)?;
    match dataset {
        DatasetId::Msr3d => MSR3D_ACTIONS.get(idx).copied(),
        DatasetId::Kard => KARD_ACTIONS.get(idx).copied(),
    }
}
