mod common;

use rand::Rng;
use skelres_core::augment::{
    augment_all, augment_all_tagged, crop, eval_view, flip_h, flip_v, permute_channels,
    AugmentPolicy, CropMode, CROP_SIZE,
};
use skelres_core::dataset::{DatasetId, Joint, SequenceId, SkeletonFrame, SkeletonSequence};
use skelres_core::encoder::{compute_stats, encode, quantize, resize_bilinear, stack_frames, PartMap, RealImage};
use skelres_core::raster::Image;

use common::{default_part_map, encode_oracle, random_sequence, rng};

fn uniform_channels(h: usize, w: usize, values: &[f64]) -> RealImage {
    RealImage {
        height: h,
        width: w,
        data: values.iter().flat_map(|&v| [v; 3]).collect(),
    }
}

#[test]
fn matches_scalar_oracle_across_shapes() {
    let mut r = rng(21);
    for n in [1, 2, 3, 7, 39, 40, 41, 120] {
        for k in [15, 20] {
            let dataset = if k == 15 { DatasetId::Kard } else { DatasetId::Msr3d };
            let seq = random_sequence(&mut r, dataset, n, k);
            let pm = default_part_map(k);
            let img = encode(&seq, &pm).unwrap();
            assert_eq!((img.height(), img.width()), (40, 40));
            assert_eq!(img.data(), encode_oracle(&seq, pm.parts()).as_slice(), "N={n} K={k}");
        }
    }
}

#[test]
fn checkerboard_upsamples_with_half_pixel_centers() {
    let src = uniform_channels(2, 2, &[0.0, 255.0, 255.0, 0.0]);
    let out = resize_bilinear(&src, 4, 4);
    #[rustfmt::skip]
    let want = [
        0.0, 63.75, 191.25, 255.0,
        63.75, 95.625, 159.375, 191.25,
        191.25, 159.375, 95.625, 63.75,
        255.0, 191.25, 63.75, 0.0,
    ];
    for (i, w) in want.iter().enumerate() {
        for ch in 0..3 {
            assert_eq!(out.get(i / 4, i % 4, ch), *w, "pixel {i}");
        }
    }
}

#[test]
fn quantization_rounds_half_away_from_zero() {
    let grid = uniform_channels(1, 6, &[127.5, 0.49999, 254.5, 0.5, 3.5, 255.0]);
    let img = quantize(&grid);
    let got: Vec<u8> = (0..6).map(|c| img.get(0, c, 0)).collect();
    assert_eq!(got, vec![128, 0, 255, 1, 4, 255]);
}

#[test]
fn columns_follow_part_order() {
    let frames = (0..3)
        .map(|t| SkeletonFrame::new((0..5).map(|j| Joint::new(j as f64, t as f64, 0.0)).collect()))
        .collect();
    let seq = SkeletonSequence::new(SequenceId::new(DatasetId::Kard, 1, 1, 1).unwrap(), frames).unwrap();
    let pm = PartMap::new([vec![3, 1], vec![0], vec![4], vec![], vec![2]]).unwrap();
    assert_eq!(pm.column_order(), vec![1, 3, 0, 4, 2]);
    let raw = stack_frames(&seq, compute_stats(&seq).unwrap(), &pm).unwrap();
    let xs: Vec<f64> = (0..5).map(|c| raw.get(0, c, 0)).collect();
    let step = 255.0 / 4.0;
    assert_eq!(xs, vec![step, 3.0 * step, 0.0, 255.0, 2.0 * step]);
}

#[test]
fn part_map_text_round_trips() {
    for dataset in [DatasetId::Msr3d, DatasetId::Kard] {
        let pm = PartMap::default_for(dataset);
        let back: PartMap = pm.to_string().parse().unwrap();
        assert_eq!(back, pm);
        assert_eq!(pm.joint_count(), dataset.default_joint_count());
    }
    assert!("P1: 0,1\nP2: 1\n".parse::<PartMap>().is_err());
    assert!("P6: 0\n".parse::<PartMap>().is_err());
}

#[test]
fn part_map_must_cover_the_skeleton() {
    let mut r = rng(22);
    let seq = random_sequence(&mut r, DatasetId::Msr3d, 4, 20);
    assert!(encode(&seq, &PartMap::default_for(DatasetId::Kard)).is_err());
}

#[test]
fn single_frame_and_constant_coordinates() {
    let id = SequenceId::new(DatasetId::Msr3d, 1, 1, 1).unwrap();
    let one = SkeletonSequence::new(
        id,
        vec![SkeletonFrame::new((0..20).map(|j| Joint::new(j as f64, 0.0, 1.0)).collect())],
    )
    .unwrap();
    let img = encode(&one, &default_part_map(20)).unwrap();
    for r in 1..40 {
        for c in 0..40 {
            assert_eq!(img.get(r, c, 0), img.get(0, c, 0));
        }
    }
}

#[test]
fn augmentation_enumerates_distinct_variants() {
    let mut r = rng(23);
    let img = Image::from_fn(40, 40, |_, _, _| r.random());
    let tagged = augment_all_tagged(&img, &AugmentPolicy::full(), 0).unwrap();
    assert_eq!(tagged.len(), 144);
    let names: std::collections::BTreeSet<String> = tagged.iter().map(|(v, _)| v.to_string()).collect();
    assert_eq!(names.len(), 144);
    let (first, view) = &tagged[0];
    assert_eq!(first.to_string(), "crop0.orig.perm0");
    assert_eq!(*view, crop(&img, 0, 0, CROP_SIZE).unwrap());

    let flipped = &tagged[6].1;
    assert_eq!(*flipped, flip_h(&crop(&img, 0, 0, CROP_SIZE).unwrap()));
    assert_eq!(tagged[17].1, permute_channels(&flip_v(&crop(&img, 0, 0, CROP_SIZE).unwrap()), [2, 1, 0]));
}

#[test]
fn grid_crops_skip_the_center() {
    let img = Image::from_fn(40, 40, |r, c, ch| if ch == 0 { r as u8 } else { c as u8 });
    let crops = augment_all(&img, &AugmentPolicy::crops_only()).unwrap();
    let origins: Vec<(u8, u8)> = crops.iter().map(|v| (v.get(0, 0, 0), v.get(0, 0, 1))).collect();
    assert_eq!(origins, vec![(0, 0), (0, 4), (0, 8), (4, 0), (4, 8), (8, 0), (8, 4), (8, 8)]);
    let center = eval_view(&img).unwrap();
    assert_eq!((center.get(0, 0, 0), center.get(0, 0, 1)), (4, 4));
}

#[test]
fn random_crops_are_reproducible_per_image() {
    let mut r = rng(24);
    let img = Image::from_fn(40, 40, |_, _, _| r.random());
    let policy = AugmentPolicy {
        crop_mode: CropMode::Random { seed: 5 },
        ..AugmentPolicy::crops_only()
    };
    let a = augment_all_tagged(&img, &policy, 3).unwrap();
    let b = augment_all_tagged(&img, &policy, 3).unwrap();
    let c = augment_all_tagged(&img, &policy, 4).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn augmentation_rejects_wrong_sizes_and_empty_policies() {
    let small = Image::filled(32, 32, 0);
    assert!(augment_all(&small, &AugmentPolicy::full()).is_err());
    let img = Image::filled(40, 40, 0);
    let none = AugmentPolicy {
        crops_enabled: false,
        ..AugmentPolicy::full()
    };
    assert!(augment_all(&img, &none).is_err());
}
