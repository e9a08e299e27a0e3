mod common;

use std::collections::BTreeSet;

use hyfacial::dataset::GrayImage;
use hyfacial::descriptors::fast::{fast_candidates, CIRCLE};
use hyfacial::descriptors::orb::{hamming, orb_describe_with};
use hyfacial::descriptors::{
    fast_detect, orb_describe, orb_detect_describe, sift_detect_describe, DescriptorVectors, OrbParams,
};
use hyfacial::selection::pool_descriptors;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Pixels at multiples of 1/256 on a coarse random block layout, so there are
/// plenty of corners and shifts by dyadic constants stay exact.
fn blocky_image(h: usize, w: usize, cell: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (gh, gw) = (h.div_ceil(cell), w.div_ceil(cell));
    let levels: Vec<f64> = (0..gh * gw).map(|_| rng.random_range(0..128u32) as f64 / 256.0).collect();
    GrayImage::from_fn(h, w, |y, x| levels[(y / cell) * gw + x / cell])
}

/// Plain segment test: some run of `n` contiguous circle pixels, all brighter
/// than p + t or all darker than p − t.
fn oracle_corners(img: &GrayImage, t: f64, n: usize) -> BTreeSet<(usize, usize)> {
    let (h, w) = (img.height(), img.width());
    let mut out = BTreeSet::new();
    for y in 3..h.saturating_sub(3) {
        for x in 3..w.saturating_sub(3) {
            let p = img.get(y, x);
            let ring: Vec<f64> = CIRCLE
                .iter()
                .map(|&(dx, dy)| img.get((y as isize + dy) as usize, (x as isize + dx) as usize))
                .collect();
            let hit = (0..16).any(|start| {
                (0..n).all(|o| ring[(start + o) % 16] > p + t) || (0..n).all(|o| ring[(start + o) % 16] < p - t)
            });
            if hit {
                out.insert((x, y));
            }
        }
    }
    out
}

fn real_rows(v: &DescriptorVectors) -> Vec<Vec<f64>> {
    match v {
        DescriptorVectors::Real(m) => m.row_iter().map(|r| r.to_vec()).collect(),
        DescriptorVectors::Binary(_) => panic!("expected real descriptors"),
    }
}

fn codes(v: &DescriptorVectors) -> &[[u8; 32]] {
    match v {
        DescriptorVectors::Binary(c) => c,
        DescriptorVectors::Real(_) => panic!("expected binary descriptors"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn fast_matches_segment_test_oracle(
        h in 7usize..=64, w in 7usize..=64, cell in 1usize..6, n in 9usize..=12, seed in any::<u64>()
    ) {
        let img = blocky_image(h, w, cell, seed);
        let t = 20.0 / 255.0;
        let got: BTreeSet<_> = fast_candidates(&img, t, n).into_iter().map(|(x, y, _)| (x, y)).collect();
        prop_assert_eq!(&got, &oracle_corners(&img, t, n));
        for kp in fast_detect(&img, t, n).unwrap() {
            prop_assert!(got.contains(&(kp.x as usize, kp.y as usize)));
        }
    }

    #[test]
    fn sift_ignores_a_constant_offset(seed in any::<u64>(), shift in 1u32..64) {
        let img = blocky_image(48, 48, 4, seed);
        let shifted = img.map(|v| v + shift as f64 / 256.0);
        let a = sift_detect_describe(&img).unwrap();
        let b = sift_detect_describe(&shifted).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn orb_depends_only_on_intensity_order(seed in any::<u64>()) {
        let img = blocky_image(48, 48, 3, seed);
        let kps = fast_detect(&img, 20.0 / 255.0, 9).unwrap();
        let remapped = img.map(|v| (v + 0.1).powi(3) + v);
        prop_assert_eq!(orb_describe_with(&img, &kps, false), orb_describe_with(&remapped, &kps, false));
        // Box sums commute with positive affine maps, so smoothing keeps the order there.
        let affine = img.map(|v| 0.5 * v + 0.25);
        prop_assert_eq!(orb_describe(&img, &kps), orb_describe(&affine, &kps));
    }

    #[test]
    fn pooled_rows_stay_in_the_input_bounds(seed in any::<u64>(), k in 1usize..6) {
        let img = blocky_image(48, 48, 3, seed);
        let ds = sift_detect_describe(&img).unwrap();
        prop_assume!(ds.len() > k);
        let rows = real_rows(&ds.vectors);
        let pooled = pool_descriptors(&ds, k, seed);
        for r in pooled.row_iter() {
            for (j, v) in r.iter().enumerate() {
                let lo = rows.iter().map(|x| x[j]).fold(f64::INFINITY, f64::min);
                let hi = rows.iter().map(|x| x[j]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
            }
        }
    }
}

#[test]
fn square_corners_are_found() {
    let img = GrayImage::from_fn(32, 32, |y, x| if (11..21).contains(&y) && (11..21).contains(&x) { 1.0 } else { 0.0 });
    let kps = fast_detect(&img, 20.0 / 255.0, 9).unwrap();
    for (cx, cy) in [(11.0, 11.0), (20.0, 11.0), (11.0, 20.0), (20.0, 20.0)] {
        assert!(
            kps.iter().any(|k| (k.x - cx).abs() <= 2.0 && (k.y - cy).abs() <= 2.0),
            "no corner near ({cx}, {cy})"
        );
    }
}

#[test]
fn sift_rows_are_unit_norm() {
    let ds = sift_detect_describe(&blocky_image(48, 48, 4, 3)).unwrap();
    assert!(!ds.is_empty());
    for r in real_rows(&ds.vectors) {
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        assert!(r.iter().all(|&v| v <= 0.2 + 1e-12));
    }
}

#[test]
fn orb_self_distance_is_zero() {
    let img = blocky_image(48, 48, 3, 4);
    let a = orb_detect_describe(&img, &OrbParams::default()).unwrap();
    let b = orb_detect_describe(&img, &OrbParams::default()).unwrap();
    assert!(!a.is_empty());
    for (x, y) in codes(&a.vectors).iter().zip(codes(&b.vectors)) {
        assert_eq!(hamming(x, y), 0);
    }
}

#[test]
fn orb_survives_a_quarter_turn() {
    // Bright shapes on a dark ground, away from the descriptor border.
    let img = GrayImage::from_fn(64, 64, |y, x| {
        let (fy, fx) = (y as f64, x as f64);
        let mut v: f64 = 0.1;
        if (20..30).contains(&y) && (22..40).contains(&x) {
            v = 0.8;
        }
        if fx + fy > 70.0 && fx < 44.0 && fy < 46.0 {
            v = 0.55;
        }
        if ((fx - 26.0).powi(2) + (fy - 40.0).powi(2)).sqrt() < 4.0 {
            v = 0.95;
        }
        v
    });
    let rot = img.rotate90();
    let a = orb_detect_describe(&img, &OrbParams::default()).unwrap();
    let b = orb_detect_describe(&rot, &OrbParams::default()).unwrap();
    let (ca, cb) = (codes(&a.vectors), codes(&b.vectors));
    let mut dists = Vec::new();
    for (i, k) in a.keypoints.iter().enumerate() {
        // (y, x) moves to (w − 1 − x, y).
        let (tx, ty) = (k.y, 63.0 - k.x);
        let m = b
            .keypoints
            .iter()
            .enumerate()
            .filter(|(_, q)| (q.x - tx).abs() <= 1.0 && (q.y - ty).abs() <= 1.0)
            .min_by(|p, q| hamming(&ca[i], &cb[p.0]).cmp(&hamming(&ca[i], &cb[q.0])));
        if let Some((j, _)) = m {
            dists.push(hamming(&ca[i], &cb[j]));
        }
    }
    assert!(dists.len() >= 3, "only {} matched keypoints", dists.len());
    dists.sort_unstable();
    let median = dists[dists.len() / 2];
    assert!(median < 64, "median Hamming distance {median} over {dists:?}");
}
