//! Published accuracies, kept as the exact decimal strings they were
//! reported with.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineRow {
    pub method: &'static str,
    pub values: &'static [&'static str],
}

impl BaselineRow {
    pub fn value(&self, column: usize) -> f64 {
        self.values[column].parse().expect("baseline constants are decimal")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineTable {
    pub title: &'static str,
    pub columns: &'static [&'static str],
    pub rows: &'static [BaselineRow],
}

impl BaselineTable {
    pub fn row(&self, method: &str) -> Option<&BaselineRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}

const fn row(method: &'static str, values: &'static [&'static str]) -> BaselineRow {
    BaselineRow { method, values }
}

const MSR3D_COLUMNS: &[&str] = &["AS1", "AS2", "AS3", "Aver."];
const KARD_COLUMNS: &[&str] = &["Exp. A", "Exp. B", "Exp. C"];

/// Residual networks of each depth on the three MSR Action 3D subsets.
/// The ResNet-110 average is reproduced as published although it is not the
/// mean of its three entries.
pub const MSR3D_BY_DEPTH: BaselineTable = BaselineTable {
    title: "MSR Action 3D, cross-subject, by network depth",
    columns: MSR3D_COLUMNS,
    rows: &[
        row("ResNet-20", &["99.40", "99.00", "100.0", "99.47"]),
        row("ResNet-32", &["99.50", "98.70", "99.70", "99.30"]),
        row("ResNet-44", &["99.60", "98.20", "99.80", "99.20"]),
        row("ResNet-56", &["99.20", "97.30", "99.60", "98.70"]),
        row("ResNet-110", &["99.20", "98.00", "99.90", "99.37"]),
    ],
};

pub const KARD_SET1_BY_DEPTH: BaselineTable = BaselineTable {
    title: "KARD Activity Set 1, by network depth",
    columns: KARD_COLUMNS,
    rows: &[
        row("ResNet-20", &["100", "100", "100"]),
        row("ResNet-32", &["100", "100", "100"]),
        row("ResNet-44", &["100", "100", "99.9"]),
        row("ResNet-56", &["100", "100", "99.9"]),
        row("ResNet-110", &["99.7", "100", "100"]),
    ],
};

pub const KARD_SET2_BY_DEPTH: BaselineTable = BaselineTable {
    title: "KARD Activity Set 2, by network depth",
    columns: KARD_COLUMNS,
    rows: &[
        row("ResNet-20", &["100", "100", "100"]),
        row("ResNet-32", &["100", "100", "99.9"]),
        row("ResNet-44", &["100", "100", "100"]),
        row("ResNet-56", &["100", "100", "100"]),
        row("ResNet-110", &["99.9", "100", "100"]),
    ],
};

pub const KARD_SET3_BY_DEPTH: BaselineTable = BaselineTable {
    title: "KARD Activity Set 3, by network depth",
    columns: KARD_COLUMNS,
    rows: &[
        row("ResNet-20", &["99.8", "100", "99.8"]),
        row("ResNet-32", &["99.8", "99.9", "99.8"]),
        row("ResNet-44", &["99.0", "99.7", "99.7"]),
        row("ResNet-56", &["99.4", "99.9", "99.8"]),
        row("ResNet-110", &["99.1", "100", "99.7"]),
    ],
};

pub const KARD_BY_DEPTH: [BaselineTable; 3] = [KARD_SET1_BY_DEPTH, KARD_SET2_BY_DEPTH, KARD_SET3_BY_DEPTH];

pub const BEST_MODEL: &str = "Our best model";

/// Other methods on MSR Action 3D under the same cross-subject protocol.
pub const MSR3D_COMPARISON: BaselineTable = BaselineTable {
    title: "MSR Action 3D, comparison with other approaches",
    columns: MSR3D_COLUMNS,
    rows: &[
        row("Li et al. [16]", &["72.90", "71.90", "79.20", "74.67"]),
        row("Vieira et al. [31]", &["84.70", "81.30", "88.40", "84.80"]),
        row("Xia et al. [33]", &["87.98", "85.48", "63.46", "78.97"]),
        row("Chaaraoui et al. [1]", &["92.38", "86.61", "96.40", "91.80"]),
        row("Chen et al. [3]", &["96.20", "83.20", "92.00", "90.47"]),
        row("Luo et al. [19]", &["97.20", "95.50", "99.10", "97.26"]),
        row("Gowayyed et al. [10]", &["92.39", "90.18", "91.43", "91.26"]),
        row("Hussein et al. [14]", &["88.04", "89.29", "94.29", "90.53"]),
        row("Qin et al. [23]", &["81.00", "79.00", "82.00", "80.66"]),
        row("Liang et al. [17]", &["73.70", "81.50", "81.60", "78.93"]),
        row("Evangelidis et al. [7]", &["88.39", "86.61", "94.59", "89.86"]),
        row("Ilias et al. [26]", &["91.23", "90.09", "99.50", "93.61"]),
        row("Gao et al. [9]", &["92.00", "85.00", "93.00", "90.00"]),
        row("Vieira et al. [30]", &["91.70", "72.20", "98.60", "87.50"]),
        row("Chen et al. [2]", &["98.10", "92.00", "94.60", "94.90"]),
        row("Du et al. [5]", &["93.33", "94.64", "95.50", "94.49"]),
        row(BEST_MODEL, &["99.40", "99.00", "100.00", "99.47"]),
    ],
};

/// Average accuracy over the three KARD activity sets per experiment.
pub const KARD_COMPARISON: BaselineTable = BaselineTable {
    title: "KARD, whole dataset, comparison with other approaches",
    columns: KARD_COLUMNS,
    rows: &[
        row("Gaglio et al. [8]", &["89.73", "94.50", "88.27"]),
        row("Cippitelli et al. [4]; P = 7", &["96.03", "97.80", "96.37"]),
        row("Cippitelli et al. [4]; P = 11", &["96.47", "98.27", "96.87"]),
        row("Cippitelli et al. [4]; P = 15", &["96.00", "97.97", "96.80"]),
        row("Ling et al. [18]", &["98.90", "99.60", "99.43"]),
        row(BEST_MODEL, &["99.87", "100.0", "99.93"]),
    ],
};

pub const ALL_TABLES: [&BaselineTable; 6] = [
    &MSR3D_BY_DEPTH,
    &KARD_SET1_BY_DEPTH,
    &KARD_SET2_BY_DEPTH,
    &KARD_SET3_BY_DEPTH,
    &MSR3D_COMPARISON,
    &KARD_COMPARISON,
];

pub fn depth_row_name(depth: usize) -> String {
    format!("ResNet-{depth}")
}
