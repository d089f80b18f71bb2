//! Training-time expansion of 40x40 encodings into 32x32 network inputs.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::ENCODED_SIZE;
use crate::error::{Error, Result};
use crate::raster::{Image, CHANNELS};

pub const CROP_SIZE: usize = 32;

/// The 3x3 grid of crop offsets without its center, row-major.
pub const CROP_OFFSETS: [(usize, usize); 8] = [
    (0, 0),
    (0, 4),
    (0, 8),
    (4, 0),
    (4, 8),
    (8, 0),
    (8, 4),
    (8, 8),
];

/// Channel permutations in lexicographic order, identity first.
pub const CHANNEL_PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CropMode {
    /// The fixed eight-offset grid.
    Grid,
    /// Eight uniformly drawn offsets in `0..=8`, per image, seeded.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentPolicy {
    pub crops_enabled: bool,
    pub flips_enabled: bool,
    pub color_enabled: bool,
    pub crop_mode: CropMode,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self::full()
    }
}

impl AugmentPolicy {
    pub fn full() -> Self {
        Self {
            crops_enabled: true,
            flips_enabled: true,
            color_enabled: true,
            crop_mode: CropMode::Grid,
        }
    }

    pub fn crops_only() -> Self {
        Self {
            flips_enabled: false,
            color_enabled: false,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.crops_enabled {
            return Err(Error::Config(
                "cropping must be enabled: the network takes 32x32 inputs".into(),
            ));
        }
        Ok(())
    }

    pub fn variant_count(&self) -> usize {
        let flips = if self.flips_enabled { 3 } else { 1 };
        let colors = if self.color_enabled { 6 } else { 1 };
        CROP_OFFSETS.len() * flips * colors
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flip {
    None,
    Horizontal,
    Vertical,
}

/// Which crop, flip and channel permutation produced a variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Variant {
    pub crop: usize,
    pub flip: Flip,
    pub permutation: usize,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flip = match self.flip {
            Flip::None => "orig",
            Flip::Horizontal => "flipH",
            Flip::Vertical => "flipV",
        };
        write!(f, "crop{}.{}.perm{}", self.crop, flip, self.permutation)
    }
}

pub fn crop(img: &Image, row: usize, col: usize, size: usize) -> Result<Image> {
    if row + size > img.height() || col + size > img.width() {
        return Err(Error::Shape(format!(
            "{size}x{size} crop at ({row},{col}) exceeds {}x{} image",
            img.height(),
            img.width()
        )));
    }
    Ok(Image::from_fn(size, size, |r, c, ch| img.get(row + r, col + c, ch)))
}

pub fn crops8(img: &Image) -> Result<Vec<Image>> {
    img.ensure_size(ENCODED_SIZE, ENCODED_SIZE)?;
    CROP_OFFSETS
        .iter()
        .map(|&(r, c)| crop(img, r, c, CROP_SIZE))
        .collect()
}

fn random_offsets(seed: u64, image_index: u64) -> [(usize, usize); 8] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(image_index);
    let max = ENCODED_SIZE - CROP_SIZE;
    std::array::from_fn(|_| (rng.random_range(0..=max), rng.random_range(0..=max)))
}

pub fn flip_h(img: &Image) -> Image {
    let w = img.width();
    Image::from_fn(img.height(), w, |r, c, ch| img.get(r, w - 1 - c, ch))
}

pub fn flip_v(img: &Image) -> Image {
    let h = img.height();
    Image::from_fn(h, img.width(), |r, c, ch| img.get(h - 1 - r, c, ch))
}

/// Output channel `i` takes input channel `perm[i]`.
pub fn permute_channels(img: &Image, perm: [usize; CHANNELS]) -> Image {
    Image::from_fn(img.height(), img.width(), |r, c, ch| img.get(r, c, perm[ch]))
}

pub fn color_variants(img: &Image) -> Vec<Image> {
    CHANNEL_PERMUTATIONS
        .iter()
        .map(|&p| permute_channels(img, p))
        .collect()
}

/// Expands a 40x40 image according to `policy`: for each crop, the crop and
/// its two flips, each in every channel permutation.
///
/// `image_index` only matters for [`CropMode::Random`], where it selects the
/// random stream for this image.
pub fn augment_all_tagged(
    img: &Image,
    policy: &AugmentPolicy,
    image_index: u64,
) -> Result<Vec<(Variant, Image)>> {
    policy.validate()?;
    img.ensure_size(ENCODED_SIZE, ENCODED_SIZE)?;
    let offsets = match policy.crop_mode {
        CropMode::Grid => CROP_OFFSETS,
        CropMode::Random { seed } => random_offsets(seed, image_index),
    };
    let flips: &[Flip] = if policy.flips_enabled {
        &[Flip::None, Flip::Horizontal, Flip::Vertical]
    } else {
        &[Flip::None]
    };
    let perms = if policy.color_enabled { 6 } else { 1 };

    let mut out = Vec::with_capacity(policy.variant_count());
    for (ci, &(r, c)) in offsets.iter().enumerate() {
        let base = crop(img, r, c, CROP_SIZE)?;
        for &flip in flips {
            let flipped = match flip {
                Flip::None => base.clone(),
                Flip::Horizontal => flip_h(&base),
                Flip::Vertical => flip_v(&base),
            };
            for (pi, perm) in CHANNEL_PERMUTATIONS.iter().take(perms).enumerate() {
                let variant = Variant {
                    crop: ci,
                    flip,
                    permutation: pi,
                };
                out.push((variant, permute_channels(&flipped, *perm)));
            }
        }
    }
    Ok(out)
}

pub fn augment_all(img: &Image, policy: &AugmentPolicy) -> Result<Vec<Image>> {
    Ok(augment_all_tagged(img, policy, 0)?
        .into_iter()
        .map(|(_, im)| im)
        .collect())
}

/// The single test-time view: the center 32x32 crop.
pub fn eval_view(img: &Image) -> Result<Image> {
    img.ensure_size(ENCODED_SIZE, ENCODED_SIZE)?;
    let off = (ENCODED_SIZE - CROP_SIZE) / 2;
    crop(img, off, off, CROP_SIZE)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient() -> Image {
        Image::from_fn(40, 40, |r, c, ch| (r * 5 + c + ch * 50) as u8)
    }

    #[test]
    fn crop_windows_match_slices() {
        let img = gradient();
        let crops = crops8(&img).unwrap();
        assert_eq!(crops.len(), 8);
        for (crop, &(r0, c0)) in crops.iter().zip(CROP_OFFSETS.iter()) {
            for r in 0..32 {
                for c in 0..32 {
                    for ch in 0..3 {
                        assert_eq!(crop.get(r, c, ch), img.get(r0 + r, c0 + c, ch));
                    }
                }
            }
        }
    }

    #[test]
    fn marker_pixel_only_in_origin_crop() {
        let mut img = Image::filled(40, 40, 10);
        img.set(0, 0, 1, 200);
        let crops = crops8(&img).unwrap();
        let holders: Vec<usize> = crops
            .iter()
            .enumerate()
            .filter(|(_, c)| c.data().contains(&200))
            .map(|(i, _)| i)
            .collect();
        assert_eq!(holders, vec![0]);
    }

    #[test]
    fn wrong_size_rejected() {
        let img = Image::filled(32, 32, 0);
        assert!(crops8(&img).is_err());
        assert!(eval_view(&img).is_err());
        assert!(augment_all(&img, &AugmentPolicy::full()).is_err());
    }

    #[test]
    fn flips() {
        let img = Image::new(1, 2, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(flip_h(&img).data(), &[4, 5, 6, 1, 2, 3]);
        assert_eq!(flip_v(&img), img);
        let g = gradient();
        assert_eq!(flip_h(&flip_h(&g)), g);
        assert_eq!(flip_v(&flip_v(&g)), g);
    }

    #[test]
    fn color_variant_order() {
        let img = Image::new(1, 1, vec![10, 20, 30]).unwrap();
        let v: Vec<Vec<u8>> = color_variants(&img).iter().map(|i| i.data().to_vec()).collect();
        assert_eq!(
            v,
            vec![
                vec![10, 20, 30],
                vec![10, 30, 20],
                vec![20, 10, 30],
                vec![20, 30, 10],
                vec![30, 10, 20],
                vec![30, 20, 10],
            ]
        );
    }

    #[test]
    fn counts_by_policy() {
        let img = gradient();
        for (flips, color, n) in [(true, true, 144), (false, false, 8), (true, false, 24), (false, true, 48)] {
            let policy = AugmentPolicy {
                flips_enabled: flips,
                color_enabled: color,
                ..AugmentPolicy::full()
            };
            assert_eq!(policy.variant_count(), n);
            assert_eq!(augment_all(&img, &policy).unwrap().len(), n);
        }
        let off = AugmentPolicy {
            crops_enabled: false,
            ..AugmentPolicy::full()
        };
        assert!(augment_all(&img, &off).is_err());
    }

    #[test]
    fn variant_tags() {
        let tagged = augment_all_tagged(&gradient(), &AugmentPolicy::full(), 0).unwrap();
        assert_eq!(tagged[0].0.to_string(), "crop0.orig.perm0");
        assert_eq!(tagged[7].0.to_string(), "crop0.flipH.perm1");
        assert_eq!(tagged[143].0.to_string(), "crop7.flipV.perm5");
    }

    #[test]
    fn random_crops_are_seeded() {
        let policy = AugmentPolicy {
            crop_mode: CropMode::Random { seed: 9 },
            ..AugmentPolicy::crops_only()
        };
        let img = gradient();
        let a = augment_all_tagged(&img, &policy, 3).unwrap();
        let b = augment_all_tagged(&img, &policy, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
        assert_ne!(random_offsets(9, 3), random_offsets(9, 4));
    }

    #[test]
    fn eval_view_is_center() {
        let mut img = Image::filled(40, 40, 0);
        img.set(4, 4, 2, 99);
        let v = eval_view(&img).unwrap();
        assert_eq!(v.get(0, 0, 2), 99);
        let g = gradient();
        let v = eval_view(&g).unwrap();
        assert_eq!(v.get(31, 31, 0), g.get(35, 35, 0));
    }
}
