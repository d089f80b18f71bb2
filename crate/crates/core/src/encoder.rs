//! Skeleton sequence to color image encoding.
//!
//! A sequence becomes a `N x K` three-channel image: row `t` is frame `t`,
//! columns are joints grouped by body part, and the channels carry the
//! min-max normalized `x`, `y`, `z` coordinates. The image is then resized
//! to 40x40 and quantized to 8 bits.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::dataset::{DatasetId, SkeletonSequence};
use crate::error::{Error, Result};
use crate::raster::{Image, CHANNELS};

pub const ENCODED_SIZE: usize = 40;

/// Extrema of the pooled `x`, `y` and `z` values of one sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationStats {
    pub min: f64,
    pub max: f64,
}

/// Real-valued three-channel image, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl RealImage {
    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.width + col) * CHANNELS + channel]
    }
}

/// Assignment of joint indices to the five body parts: left arm, right arm,
/// trunk, left leg, right leg.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartMap {
    parts: [Vec<usize>; 5],
}

impl PartMap {
    /// Each part's indices are kept in ascending order.
    pub fn new(mut parts: [Vec<usize>; 5]) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for part in parts.iter_mut() {
            part.sort_unstable();
            for &j in part.iter() {
                if !seen.insert(j) {
                    return Err(Error::Config(format!("joint {j} assigned to two parts")));
                }
            }
        }
        Ok(Self { parts })
    }

    /// Every joint in its own position; still a valid five-part map.
    pub fn identity(joints: usize) -> Self {
        Self {
            parts: [(0..joints).collect(), vec![], vec![], vec![], vec![]],
        }
    }

    pub fn default_for(dataset: DatasetId) -> Self {
        let text = match dataset {
            DatasetId::Msr3d => include_str!("../partmaps/msr3d_20.txt"),
            DatasetId::Kard => include_str!("../partmaps/kard_15.txt"),
        };
        text.parse().expect("bundled part map is well formed")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse().map_err(|e: Error| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn parts(&self) -> &[Vec<usize>; 5] {
        &self.parts
    }

    pub fn joint_count(&self) -> usize {
        self.parts.iter().map(Vec::len).sum()
    }

    /// Column order of the stacked image: `P1 ++ P2 ++ P3 ++ P4 ++ P5`.
    pub fn column_order(&self) -> Vec<usize> {
        self.parts.iter().flatten().copied().collect()
    }

    /// Checks that the parts cover exactly `0..joints`.
    pub fn check_covers(&self, joints: usize) -> Result<()> {
        let n = self.joint_count();
        let max = self.parts.iter().flatten().max().copied();
        if n != joints || max.is_some_and(|m| m >= joints) {
            return Err(Error::Config(format!(
                "part map covers {n} joint(s) (max index {max:?}) but frames have {joints}"
            )));
        }
        Ok(())
    }
}

impl FromStr for PartMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts: [Option<Vec<usize>>; 5] = Default::default();
        for (lineno, line) in s.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: &str| Error::Config(format!("part map line {}: {m}", lineno + 1));
            let (key, list) = line.split_once(':').ok_or_else(|| err("expected 'Pn: i,j,...'"))?;
            let idx = match key.trim() {
                "P1" => 0,
                "P2" => 1,
                "P3" => 2,
                "P4" => 3,
                "P5" => 4,
                other => return Err(err(&format!("unknown part '{other}'"))),
            };
            if parts[idx].is_some() {
                return Err(err("part listed twice"));
            }
            let joints = list
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<usize>().map_err(|_| err(&format!("bad index '{t}'"))))
                .collect::<Result<Vec<_>>>()?;
            parts[idx] = Some(joints);
        }
        let parts = parts.map(|p| p.unwrap_or_default());
        PartMap::new(parts)
    }
}

impl fmt::Display for PartMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, part) in self.parts.iter().enumerate() {
            let list: Vec<String> = part.iter().map(usize::to_string).collect();
            writeln!(f, "P{}: {}", i + 1, list.join(","))?;
        }
        Ok(())
    }
}

pub fn compute_stats(seq: &SkeletonSequence) -> Result<NormalizationStats> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for frame in seq.frames() {
        for joint in &frame.joints {
            for v in joint.coords() {
                if !v.is_finite() {
                    return Err(Error::Data(format!("{}: non-finite coordinate", seq.id())));
                }
                min = min.min(v);
                max = max.max(v);
            }
        }
    }
    Ok(NormalizationStats { min, max })
}

/// Maps `v` from `[min, max]` onto `[0, 255]`. A degenerate range maps to 0.
#[inline]
pub fn normalize(v: f64, stats: NormalizationStats) -> f64 {
    let range = stats.max - stats.min;
    if range > 0.0 {
        255.0 * ((v - stats.min) / range)
    } else {
        0.0
    }
}

/// Stacks normalized frames into an `N x K` image with part-ordered columns.
pub fn stack_frames(
    seq: &SkeletonSequence,
    stats: NormalizationStats,
    part_map: &PartMap,
) -> Result<RealImage> {
    let k = seq.joint_count();
    part_map.check_covers(k)?;
    let order = part_map.column_order();
    let mut data = Vec::with_capacity(seq.frame_count() * k * CHANNELS);
    for frame in seq.frames() {
        for &j in &order {
            for v in frame.joints[j].coords() {
                data.push(normalize(v, stats));
            }
        }
    }
    Ok(RealImage {
        height: seq.frame_count(),
        width: k,
        data,
    })
}

/// Bilinear resize with half-pixel centers, each channel independently.
pub fn resize_bilinear(img: &RealImage, out_h: usize, out_w: usize) -> RealImage {
    let rows = sample_positions(img.height, out_h);
    let cols = sample_positions(img.width, out_w);
    let mut data = Vec::with_capacity(out_h * out_w * CHANNELS);
    for &(y0, y1, ty) in &rows {
        for &(x0, x1, tx) in &cols {
            for ch in 0..CHANNELS {
                let a = img.get(y0, x0, ch);
                let b = img.get(y0, x1, ch);
                let c = img.get(y1, x0, ch);
                let d = img.get(y1, x1, ch);
                let top = a + tx * (b - a);
                let bottom = c + tx * (d - c);
                data.push((top + ty * (bottom - top)).clamp(0.0, 255.0));
            }
        }
    }
    RealImage {
        height: out_h,
        width: out_w,
        data,
    }
}

/// For each output index: the two source indices and the weight of the second.
fn sample_positions(in_len: usize, out_len: usize) -> Vec<(usize, usize, f64)> {
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|i| {
            let src = ((i as f64 + 0.5) * scale - 0.5).max(0.0);
            let lo = (src.floor() as usize).min(in_len - 1);
            let hi = (lo + 1).min(in_len - 1);
            (lo, hi, src - lo as f64)
        })
        .collect()
}

/// Rounds half away from zero and clamps to `[0, 255]`.
pub fn quantize(grid: &RealImage) -> Image {
    let data = grid
        .data
        .iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    Image::new(grid.height, grid.width, data).expect("grid dimensions are consistent")
}

/// Full encoding pipeline producing a 40x40 image.
pub fn encode(seq: &SkeletonSequence, part_map: &PartMap) -> Result<Image> {
    let stats = compute_stats(seq)?;
    let raw = stack_frames(seq, stats, part_map)?;
    let resized = resize_bilinear(&raw, ENCODED_SIZE, ENCODED_SIZE);
    Ok(quantize(&resized))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Joint, SequenceId, SkeletonFrame};

    fn seq(frames: &[&[[f64; 3]]]) -> SkeletonSequence {
        let id = SequenceId::new(DatasetId::Kard, 1, 1, 1).unwrap();
        let frames = frames
            .iter()
            .map(|f| SkeletonFrame::new(f.iter().map(|&[x, y, z]| Joint::new(x, y, z)).collect()))
            .collect();
        SkeletonSequence::new(id, frames).unwrap()
    }

    #[test]
    fn stats_over_pooled_coordinates() {
        let s = seq(&[&[[-1.0, 0.0, 2.0]], &[[0.0, 0.0, 0.0]]]);
        assert_eq!(compute_stats(&s).unwrap(), NormalizationStats { min: -1.0, max: 2.0 });
        let s = seq(&[&[[5.0, 5.0, 5.0]], &[[5.0, 5.0, 5.0]]]);
        assert_eq!(compute_stats(&s).unwrap(), NormalizationStats { min: 5.0, max: 5.0 });
    }

    #[test]
    fn normalize_values() {
        let unit = NormalizationStats { min: 0.0, max: 1.0 };
        assert_eq!(normalize(0.0, unit), 0.0);
        assert_eq!(normalize(1.0, unit), 255.0);
        assert_eq!(normalize(0.5, unit), 127.5);
        assert_eq!(normalize(5.0, NormalizationStats { min: 5.0, max: 5.0 }), 0.0);
        let s = NormalizationStats { min: -1.0, max: 2.0 };
        assert!((normalize(-0.25, s) - 63.75).abs() < 1e-12);
    }

    #[test]
    fn stack_single_frame_identity_map() {
        let s = seq(&[&[[0.0, 1.0, 0.5], [1.0, 0.0, 0.25]]]);
        let stats = compute_stats(&s).unwrap();
        let img = stack_frames(&s, stats, &PartMap::identity(2)).unwrap();
        assert_eq!((img.height, img.width), (1, 2));
        assert_eq!(img.data, vec![0.0, 255.0, 127.5, 255.0, 0.0, 63.75]);
    }

    #[test]
    fn part_map_permutes_columns() {
        let s = seq(&[
            &[[0.0, 1.0, 2.0], [3.0, 4.0, 5.0], [6.0, 7.0, 8.0]],
            &[[9.0, 1.0, 2.0], [3.0, 0.0, 5.0], [6.0, 7.0, 4.0]],
        ]);
        let stats = compute_stats(&s).unwrap();
        let plain = stack_frames(&s, stats, &PartMap::identity(3)).unwrap();
        let swapped = PartMap::new([vec![2], vec![0, 1], vec![], vec![], vec![]]).unwrap();
        let perm = stack_frames(&s, stats, &swapped).unwrap();
        for r in 0..2 {
            for (out_col, src_col) in [2usize, 0, 1].into_iter().enumerate() {
                for ch in 0..3 {
                    assert_eq!(perm.get(r, out_col, ch), plain.get(r, src_col, ch));
                }
            }
        }
    }

    #[test]
    fn part_map_mismatch_is_an_error() {
        let s = seq(&[&[[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]]]);
        let stats = compute_stats(&s).unwrap();
        assert!(stack_frames(&s, stats, &PartMap::identity(3)).is_err());
        let gap = PartMap::new([vec![0], vec![2], vec![], vec![], vec![]]).unwrap();
        assert!(stack_frames(&s, stats, &gap).is_err());
    }

    #[test]
    fn part_map_parsing() {
        let pm: PartMap = "P1: 2,0\nP3: 1\n".parse().unwrap();
        assert_eq!(pm.column_order(), vec![0, 2, 1]);
        assert_eq!(pm.to_string().parse::<PartMap>().unwrap(), pm);
        assert!("P1: 0\nP2: 0\n".parse::<PartMap>().is_err());
        assert!("P6: 0\n".parse::<PartMap>().is_err());
        assert!("P1: x\n".parse::<PartMap>().is_err());
    }

    #[test]
    fn bundled_part_maps_partition_their_skeletons() {
        PartMap::default_for(DatasetId::Msr3d).check_covers(20).unwrap();
        PartMap::default_for(DatasetId::Kard).check_covers(15).unwrap();
    }

    #[test]
    fn resize_identity_and_constant() {
        let img = RealImage {
            height: 40,
            width: 40,
            data: (0..4800).map(|i| (i % 256) as f64 * 0.99).collect(),
        };
        assert_eq!(resize_bilinear(&img, 40, 40), img);
        let flat = RealImage {
            height: 3,
            width: 7,
            data: vec![113.37; 63],
        };
        assert!(resize_bilinear(&flat, 40, 40).data.iter().all(|&v| v == 113.37));
    }

    #[test]
    fn quantize_rounding() {
        let g = RealImage {
            height: 1,
            width: 2,
            data: vec![127.5, 255.0, 0.0, 0.49999, 254.5, 3.5],
        };
        assert_eq!(quantize(&g).data(), &[128, 255, 0, 0, 255, 4]);
    }

    #[test]
    fn constant_sequence_encodes_to_black() {
        let s = seq(&[&[[2.0, 2.0, 2.0], [2.0, 2.0, 2.0]]]);
        let img = encode(&s, &PartMap::identity(2)).unwrap();
        assert_eq!((img.height(), img.width()), (40, 40));
        assert!(img.data().iter().all(|&v| v == 0));
    }
}
