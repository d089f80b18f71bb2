use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::baseline::{
    depth_row_name, BaselineTable, BEST_MODEL, KARD_BY_DEPTH, KARD_COMPARISON, MSR3D_BY_DEPTH,
    MSR3D_COMPARISON,
};
use super::protocol::{ExperimentResult, RunStatus};
use super::write_atomic;
use crate::dataset::{DatasetId, Experiment, Subset};
use crate::error::{Error, Result};

pub const RESULTS_FILE: &str = "results.json";
pub const COMPARISON_FILE: &str = "comparison.md";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub results: PathBuf,
    pub confusion: Vec<PathBuf>,
    pub comparison: PathBuf,
}

/// Percentage rounded half-up to two decimals.
pub fn format_percent(value: f64) -> String {
    // Snap to 1e-6 of a hundredth first so that decimal ties such as 99.405,
    // stored slightly below the tie, still round up.
    let hundredths = ((value * 100.0 * 1e6).round() / 1e6 + 0.5).floor();
    format!("{:.2}", hundredths / 100.0)
}

fn format_delta(value: f64) -> String {
    let s = format_percent(value.abs());
    if s == "0.00" {
        s
    } else if value > 0.0 {
        format!("+{s}")
    } else {
        format!("-{s}")
    }
}

pub fn confusion_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("true\\predicted");
    for label in &result.class_labels {
        let _ = write!(out, ",{label}");
    }
    out.push('\n');
    for (label, row) in result.class_labels.iter().zip(&result.confusion_matrix) {
        out.push_str(label);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

fn markdown_row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

fn table_header(out: &mut String, table: &BaselineTable, first: &str) {
    let mut cells = vec![first.to_string()];
    cells.extend(table.columns.iter().map(|c| c.to_string()));
    out.push_str(&markdown_row(&cells));
    out.push_str(&markdown_row(&vec!["---".to_string(); cells.len()]));
}

fn published_row(out: &mut String, name: &str, values: &[&str]) {
    let mut cells = vec![name.to_string()];
    cells.extend(values.iter().map(|v| v.to_string()));
    out.push_str(&markdown_row(&cells));
}

fn obtained_cells(values: &[Option<f64>]) -> Vec<String> {
    values
        .iter()
        .map(|v| v.map_or("n/a".to_string(), format_percent))
        .collect()
}

fn delta_cells(obtained: &[Option<f64>], reference: &[&str]) -> Vec<String> {
    obtained
        .iter()
        .zip(reference)
        .map(|(o, r)| match o {
            Some(v) => format_delta(v - r.parse::<f64>().expect("decimal constant")),
            None => "n/a".to_string(),
        })
        .collect()
}

/// Obtained and reference rows plus a delta row.
fn comparison_block(out: &mut String, label: &str, obtained: &[Option<f64>], reference_name: &str, reference: &[&str]) {
    let mut row = vec![format!("{label} (obtained)")];
    row.extend(obtained_cells(obtained));
    out.push_str(&markdown_row(&row));
    let mut row = vec![format!("Delta vs {reference_name}")];
    row.extend(delta_cells(obtained, reference));
    out.push_str(&markdown_row(&row));
}

type Key = (Subset, Option<Experiment>, usize);

fn completed(results: &[ExperimentResult]) -> BTreeMap<Key, f64> {
    results
        .iter()
        .filter(|r| r.status == RunStatus::Complete && !r.per_split_accuracy.is_empty())
        .map(|r| ((r.protocol.subset, r.protocol.experiment, r.model_depth), r.mean_accuracy))
        .collect()
}

fn average(values: &[Option<f64>]) -> Option<f64> {
    let v: Option<Vec<f64>> = values.iter().copied().collect();
    v.map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

fn msr3d_values(got: &BTreeMap<Key, f64>, depth: usize) -> Vec<Option<f64>> {
    let mut values: Vec<Option<f64>> = Subset::MSR3D.iter().map(|&s| got.get(&(s, None, depth)).copied()).collect();
    values.push(average(&values));
    values
}

fn kard_values(got: &BTreeMap<Key, f64>, set: Subset, depth: usize) -> Vec<Option<f64>> {
    Experiment::ALL
        .iter()
        .map(|&e| got.get(&(set, Some(e), depth)).copied())
        .collect()
}

/// The published table verbatim, then an obtained row and a delta row for
/// every depth that was run.
fn by_depth_table(out: &mut String, table: &BaselineTable, depths: &[usize], values: impl Fn(usize) -> Vec<Option<f64>>) {
    let _ = writeln!(out, "## {}\n", table.title);
    table_header(out, table, "Model");
    for r in table.rows {
        published_row(out, r.method, r.values);
    }
    for &d in depths {
        let name = depth_row_name(d);
        if let Some(reference) = table.row(&name) {
            comparison_block(out, &name, &values(d), &name, reference.values);
        }
    }
    out.push('\n');
}

/// The published comparison verbatim, then each depth's obtained row and
/// its delta against the best published model.
fn comparison_table(out: &mut String, table: &BaselineTable, depths: &[usize], values: impl Fn(usize) -> Vec<Option<f64>>) {
    let _ = writeln!(out, "## {}\n", table.title);
    table_header(out, table, "Method");
    for r in table.rows {
        published_row(out, r.method, r.values);
    }
    let best = table.row(BEST_MODEL).expect("best-model row");
    for &d in depths {
        comparison_block(out, &depth_row_name(d), &values(d), BEST_MODEL, best.values);
    }
    out.push('\n');
}

fn msr3d_section(out: &mut String, got: &BTreeMap<Key, f64>, depths: &[usize]) {
    by_depth_table(out, &MSR3D_BY_DEPTH, depths, |d| msr3d_values(got, d));
    comparison_table(out, &MSR3D_COMPARISON, depths, |d| msr3d_values(got, d));
}

fn kard_section(out: &mut String, got: &BTreeMap<Key, f64>, depths: &[usize]) {
    for (&set, table) in Subset::KARD.iter().zip(KARD_BY_DEPTH.iter()) {
        by_depth_table(out, table, depths, |d| kard_values(got, set, d));
    }
    comparison_table(out, &KARD_COMPARISON, depths, |d| {
        Experiment::ALL
            .iter()
            .map(|&e| average(&Subset::KARD.map(|s| got.get(&(s, Some(e), d)).copied())))
            .collect()
    });
}

/// Markdown juxtaposing obtained accuracies with the published tables.
pub fn comparison_markdown(results: &[ExperimentResult]) -> String {
    let got = completed(results);
    let mut out = String::from("# Obtained versus published accuracy (%)\n\n");
    for dataset in [DatasetId::Msr3d, DatasetId::Kard] {
        let mut depths: Vec<usize> = results
            .iter()
            .filter(|r| r.protocol.dataset() == dataset)
            .map(|r| r.model_depth)
            .collect();
        depths.sort_unstable();
        depths.dedup();
        if depths.is_empty() {
            continue;
        }
        match dataset {
            DatasetId::Msr3d => msr3d_section(&mut out, &got, &depths),
            DatasetId::Kard => kard_section(&mut out, &got, &depths),
        }
    }

    out.push_str("## Runs\n\n");
    out.push_str(&markdown_row(&[
        "Experiment".into(),
        "Per-split accuracy".into(),
        "Mean".into(),
        "Status".into(),
    ]));
    out.push_str(&markdown_row(&vec!["---".to_string(); 4]));
    for r in results {
        let splits: Vec<String> = r.per_split_accuracy.iter().map(|&a| format_percent(a)).collect();
        let status = match &r.status {
            RunStatus::Complete => "complete".to_string(),
            RunStatus::Failed { split, message } => format!("failed at split {split}: {message}"),
        };
        out.push_str(&markdown_row(&[
            r.slug(),
            splits.join(" "),
            format_percent(r.mean_accuracy),
            status,
        ]));
    }
    out
}

/// Writes `results.json`, one confusion-matrix CSV per result and the
/// comparison tables into `out_dir`.
pub fn report(results: &[ExperimentResult], out_dir: &Path) -> Result<ReportFiles> {
    if results.is_empty() {
        return Err(Error::Data("no results to report".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let results_path = out_dir.join(RESULTS_FILE);
    let json = serde_json::to_string_pretty(results).expect("results serialize") + "\n";
    write_atomic(&results_path, json.as_bytes())?;

    let mut confusion = Vec::with_capacity(results.len());
    for r in results {
        let path = out_dir.join(format!("confusion_{}.csv", r.slug()));
        write_atomic(&path, confusion_csv(r).as_bytes())?;
        confusion.push(path);
    }
    let comparison = out_dir.join(COMPARISON_FILE);
    write_atomic(&comparison, comparison_markdown(results).as_bytes())?;
    Ok(ReportFiles {
        results: results_path,
        confusion,
        comparison,
    })
}

pub fn load_results(path: &Path) -> Result<Vec<ExperimentResult>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let parsed = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|r| vec![r])
    };
    parsed.map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
