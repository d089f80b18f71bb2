//! Tab-separated image manifests:
//! `image_path action subject episode split_role [variant]`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use skelres_core::dataset::{DatasetId, SequenceId};
use skelres_core::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.tsv";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    /// Relative to the manifest's directory.
    pub image_path: PathBuf,
    pub id: SequenceId,
    pub split_role: String,
    pub variant: Option<String>,
}

pub fn render(rows: &[ManifestRow]) -> String {
    let with_variant = rows.iter().any(|r| r.variant.is_some());
    let mut out = String::from("# image_path\taction\tsubject\tepisode\tsplit_role");
    if with_variant {
        out.push_str("\tvariant");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.image_path.display(),
            r.id.action,
            r.id.subject,
            r.id.episode,
            r.split_role
        );
        if let Some(v) = &r.variant {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    out
}

pub fn parse(path: &Path, dataset: DatasetId) -> Result<Vec<ManifestRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let bad = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(5..=6).contains(&fields.len()) {
            return Err(bad(i + 1, format!("expected 5 or 6 fields, found {}", fields.len())));
        }
        let num = |s: &str| s.parse::<u16>().map_err(|_| bad(i + 1, format!("'{s}' is not a number")));
        let (action, subject, episode) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        let narrow = |v: u16| u8::try_from(v).map_err(|_| bad(i + 1, format!("{v} out of range")));
        let id = SequenceId::new(dataset, narrow(action)?, narrow(subject)?, episode)
            .map_err(|e| bad(i + 1, e.to_string()))?;
        rows.push(ManifestRow {
            image_path: PathBuf::from(fields[0]),
            id,
            split_role: fields[4].to_string(),
            variant: fields.get(5).map(|v| v.to_string()),
        });
    }
    Ok(rows)
}
