//! Training, evaluation, protocol runs and reporting.

pub mod baseline;
mod config;
mod protocol;
mod report;
mod train;

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub use baseline::{BaselineRow, BaselineTable};
pub use config::{LrStep, RunConfig, SplitOptions, TrainConfig};
pub use protocol::{
    curves_csv, encode_corpus, experiment_slug, load_result, mean, result_json, run_protocol,
    split_data, CurvePoint, ExperimentResult, ProtocolOptions, RunStatus, SplitData, CURVES_FILE,
    RESULT_FILE, RUNTIME_FILE,
};
pub use report::{
    comparison_markdown, confusion_csv, format_percent, load_results, report, ReportFiles,
    COMPARISON_FILE, RESULTS_FILE,
};
pub use train::{
    argmax, batch_tensor, evaluate, predict, score, train, train_plain, EpochHook, EpochStats,
    Evaluation, LabeledImages,
};

/// Writes `bytes` to a temporary sibling of `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Data(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}
