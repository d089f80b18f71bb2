use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use super::{DatasetId, Joint, SequenceId, SkeletonFrame, SkeletonSequence};
use crate::error::{Error, Result};

/// On-disk layout of a raw skeleton corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusLayout {
    pub dataset: DatasetId,
    pub joints_per_frame: usize,
    /// 3 (`x y z`) or 4 (`x y z confidence`).
    pub values_per_row: usize,
    /// Filename suffix following the `aAA_sSS_eEE` stem.
    pub file_suffix: String,
}

impl CorpusLayout {
    pub fn msr3d() -> Self {
        Self {
            dataset: DatasetId::Msr3d,
            joints_per_frame: 20,
            values_per_row: 4,
            file_suffix: "_skeleton3D.txt".into(),
        }
    }

    pub fn kard() -> Self {
        Self {
            dataset: DatasetId::Kard,
            joints_per_frame: 15,
            values_per_row: 3,
            file_suffix: "_realworld.txt".into(),
        }
    }

    pub fn for_dataset(dataset: DatasetId) -> Self {
        match dataset {
            DatasetId::Msr3d => Self::msr3d(),
            DatasetId::Kard => Self::kard(),
        }
    }

    pub fn file_name(&self, id: &SequenceId) -> String {
        format!("{}{}", id.stem(), self.file_suffix)
    }

    fn match_file_name(&self, name: &str) -> Option<SequenceId> {
        let stem = name.strip_suffix(self.file_suffix.as_str())?;
        if stem.len() != "aAA_sSS_eEE".len() {
            return None;
        }
        SequenceId::parse_stem(self.dataset, stem)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub path: PathBuf,
    pub message: String,
}

/// What happened to every file that matched the filename pattern but did not
/// become a sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseReport {
    /// Unreadable or malformed files.
    pub diagnostics: Vec<Diagnostic>,
    /// Parsed but rejected by [`validity_filter`].
    pub invalid: Vec<SequenceId>,
    /// Dropped because they appear in the exclusion list.
    pub excluded: Vec<SequenceId>,
}

#[derive(Debug, Clone)]
pub struct ParsedCorpus {
    pub sequences: Vec<SkeletonSequence>,
    pub report: ParseReport,
}

pub fn parse_corpus(root: &Path, layout: &CorpusLayout) -> Result<ParsedCorpus> {
    parse_corpus_excluding(root, layout, &BTreeSet::new())
}

/// Parses every file in `root` matching the layout's filename pattern.
///
/// Per-file failures are collected in the report; only an unreadable
/// directory or an empty result is a hard error. Sequences come back sorted
/// by id.
pub fn parse_corpus_excluding(
    root: &Path,
    layout: &CorpusLayout,
    exclusions: &BTreeSet<SequenceId>,
) -> Result<ParsedCorpus> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(id) = layout.match_file_name(name) {
            files.push((id, entry.path()));
        }
    }
    files.sort();

    let mut report = ParseReport::default();
    let mut sequences = Vec::new();
    for (id, path) in files {
        if exclusions.contains(&id) {
            report.excluded.push(id);
            continue;
        }
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) => {
                report.diagnostics.push(Diagnostic {
                    path,
                    message: format!("unreadable: {e}"),
                });
                continue;
            }
        };
        match parse_sequence_text(id, &text, layout) {
            Ok(seq) if validity_filter(&seq, layout.joints_per_frame) => sequences.push(seq),
            Ok(_) => report.invalid.push(id),
            Err(message) => report.diagnostics.push(Diagnostic { path, message }),
        }
    }

    if sequences.is_empty() {
        return Err(Error::NoSequences(root.to_path_buf()));
    }
    Ok(ParsedCorpus { sequences, report })
}

fn parse_sequence_text(
    id: SequenceId,
    text: &str,
    layout: &CorpusLayout,
) -> std::result::Result<SkeletonSequence, String> {
    let k = layout.joints_per_frame;
    let mut joints = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let values = line
            .split_whitespace()
            .map(|tok| tok.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| format!("line {}: malformed number ({e})", lineno + 1))?;
        if values.len() != layout.values_per_row {
            return Err(format!(
                "line {}: expected {} values, found {}",
                lineno + 1,
                layout.values_per_row,
                values.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format!("line {}: non-finite value", lineno + 1));
        }
        joints.push(Joint {
            x: values[0],
            y: values[1],
            z: values[2],
            confidence: values.get(3).copied(),
        });
    }
    if joints.is_empty() {
        return Err("no joint rows".into());
    }
    if joints.len() % k != 0 {
        return Err(format!(
            "{} joint rows is not a multiple of {k} joints per frame",
            joints.len()
        ));
    }
    let frames = joints
        .chunks(k)
        .map(|c| SkeletonFrame::new(c.to_vec()))
        .collect();
    SkeletonSequence::new(id, frames).map_err(|e| e.to_string())
}

/// A sequence is valid when every frame carries `expected_joints` joints and
/// no frame has all of its joints at the origin (a missing skeleton).
pub fn validity_filter(seq: &SkeletonSequence, expected_joints: usize) -> bool {
    seq.frames().iter().all(|frame| {
        frame.joint_count() == expected_joints && !frame.joints.iter().all(Joint::is_origin)
    })
}

/// Reads sequence identifiers, one per line. Blank lines and `#` comments are
/// ignored.
pub fn read_exclusion_list(path: &Path, dataset: DatasetId) -> Result<BTreeSet<SequenceId>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut ids = BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let id = SequenceId::parse_stem(dataset, line).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            message: format!("line {}: '{line}' is not a sequence identifier", lineno + 1),
        })?;
        ids.insert(id);
    }
    Ok(ids)
}

/// Writes the canonical interchange form: a `dataset action subject episode N K`
/// header followed by `N*K` rows of `x y z`.
///
/// Values are written with 17 significant digits so they read back bit-exactly.
/// Joint confidences are not part of the format.
pub fn write_canonical<W: Write>(seq: &SkeletonSequence, mut out: W) -> std::io::Result<()> {
    let id = seq.id();
    writeln!(
        out,
        "{} {} {} {} {} {}",
        id.dataset,
        id.action,
        id.subject,
        id.episode,
        seq.frame_count(),
        seq.joint_count()
    )?;
    for frame in seq.frames() {
        for j in &frame.joints {
            writeln!(out, "{:.16e} {:.16e} {:.16e}", j.x, j.y, j.z)?;
        }
    }
    Ok(())
}

pub fn read_canonical<R: BufRead>(input: R) -> Result<SkeletonSequence> {
    let bad = |message: String| Error::Data(format!("canonical sequence: {message}"));
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| bad("missing header".into()))?
        .map_err(|e| bad(e.to_string()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 6 {
        return Err(bad(format!("header has {} fields, expected 6", fields.len())));
    }
    let dataset: DatasetId = fields[0].parse()?;
    let int = |s: &str| {
        s.parse::<usize>()
            .map_err(|e| bad(format!("header field '{s}': {e}")))
    };
    let (action, subject, episode) = (int(fields[1])?, int(fields[2])?, int(fields[3])?);
    let (n, k) = (int(fields[4])?, int(fields[5])?);
    let narrow = |v: usize| u8::try_from(v).map_err(|_| bad(format!("label {v} out of range")));
    let id = SequenceId::new(
        dataset,
        narrow(action)?,
        narrow(subject)?,
        u16::try_from(episode).map_err(|_| bad(format!("episode {episode} out of range")))?,
    )?;
    if n == 0 || k == 0 {
        return Err(bad("N and K must be positive".into()));
    }

    let mut frames = Vec::with_capacity(n);
    for t in 0..n {
        let mut joints = Vec::with_capacity(k);
        for j in 0..k {
            let line = lines
                .next()
                .ok_or_else(|| bad(format!("truncated at frame {t}, joint {j}")))?
                .map_err(|e| bad(e.to_string()))?;
            let v = line
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("frame {t}, joint {j}: {e}")))?;
            if v.len() != 3 {
                return Err(bad(format!("frame {t}, joint {j}: expected 3 values")));
            }
            joints.push(Joint::new(v[0], v[1], v[2]));
        }
        frames.push(SkeletonFrame::new(joints));
    }
    SkeletonSequence::new(id, frames)
}
