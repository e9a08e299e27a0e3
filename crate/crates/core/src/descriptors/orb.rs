//! ORB: FAST keypoints with steered binary intensity tests.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fast::{fast_detect, FastParams};
use super::{DescriptorError, DescriptorSet, DescriptorVectors, Keypoint};
use crate::dataset::GrayImage;
use crate::rng::standard_normal;

pub const ORB_BYTES: usize = 32;
pub const ORB_BITS: usize = ORB_BYTES * 8;
pub const PATCH_SIZE: usize = 31;
pub const BORDER: usize = 16;
pub const PATTERN_SEED: u64 = 42;
const PATTERN_RADIUS: i32 = (PATCH_SIZE as i32 - 1) / 2;
const SMOOTH_RADIUS: isize = 2;

static FROZEN_PATTERN: &str = include_str!("../../fixtures/orb_pattern.txt");

/// One test: bit = 1 iff I(a) > I(b). Offsets relative to the keypoint, (x, y).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TestPair {
    pub a: (i32, i32),
    pub b: (i32, i32),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbParams {
    pub fast: FastParams,
    /// 5×5 box smoothing before the tests.
    pub smooth: bool,
    pub max_keypoints: Option<usize>,
}

impl Default for OrbParams {
    fn default() -> Self {
        OrbParams {
            fast: FastParams::default(),
            smooth: true,
            max_keypoints: None,
        }
    }
}

/// Draws the 256 test pairs: isotropic Gaussian offsets (σ = 31/5), rounded,
/// restricted to the radius-15 disc so every rotation stays inside the patch.
pub fn generate_pattern(seed: u64) -> Vec<TestPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = PATCH_SIZE as f64 / 5.0;
    let point = |rng: &mut ChaCha8Rng| loop {
        let x = (standard_normal(rng) * sigma).round() as i32;
        let y = (standard_normal(rng) * sigma).round() as i32;
        if x * x + y * y <= PATTERN_RADIUS * PATTERN_RADIUS {
            return (x, y);
        }
    };
    let mut out = Vec::with_capacity(ORB_BITS);
    while out.len() < ORB_BITS {
        let a = point(&mut rng);
        let b = point(&mut rng);
        // Burn one draw so consecutive pairs are not trivially correlated in the stream.
        let _: u32 = rng.random();
        if a != b {
            out.push(TestPair { a, b });
        }
    }
    out
}

pub fn format_pattern(pairs: &[TestPair]) -> String {
    pairs
        .iter()
        .map(|p| format!("{} {} {} {}\n", p.a.0, p.a.1, p.b.0, p.b.1))
        .collect()
}

pub fn parse_pattern(text: &str) -> Result<Vec<TestPair>, DescriptorError> {
    let mut out = Vec::with_capacity(ORB_BITS);
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: Vec<i32> = line
            .split_ascii_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| DescriptorError::BadPattern(format!("line {}: {e}", i + 1)))?;
        if v.len() != 4 || v.iter().any(|c| c.abs() > PATTERN_RADIUS) {
            return Err(DescriptorError::BadPattern(format!("line {}: expected 4 offsets in ±15", i + 1)));
        }
        out.push(TestPair {
            a: (v[0], v[1]),
            b: (v[2], v[3]),
        });
    }
    if out.len() != ORB_BITS {
        return Err(DescriptorError::BadPattern(format!("{} pairs, expected {ORB_BITS}", out.len())));
    }
    Ok(out)
}

/// The in-repo test pattern.
pub fn pattern() -> &'static [TestPair] {
    static PATTERN: OnceLock<Vec<TestPair>> = OnceLock::new();
    PATTERN.get_or_init(|| parse_pattern(FROZEN_PATTERN).expect("fixtures/orb_pattern.txt is malformed"))
}

/// 5×5 box sums with edge replication. Sums rather than means keep
/// comparisons exact.
fn box_sums(img: &GrayImage) -> Vec<f64> {
    let (h, w) = (img.height() as isize, img.width() as isize);
    let mut out = vec![0.0; (h * w) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in -SMOOTH_RADIUS..=SMOOTH_RADIUS {
                for dx in -SMOOTH_RADIUS..=SMOOTH_RADIUS {
                    let yy = (y + dy).clamp(0, h - 1) as usize;
                    let xx = (x + dx).clamp(0, w - 1) as usize;
                    acc += img.get(yy, xx);
                }
            }
            out[(y * w + x) as usize] = acc;
        }
    }
    out
}

fn inside_border(img: &GrayImage, kp: &Keypoint) -> bool {
    let (x, y) = (kp.x.round(), kp.y.round());
    x >= BORDER as f64
        && y >= BORDER as f64
        && x <= (img.width() - 1 - BORDER) as f64
        && y <= (img.height() - 1 - BORDER) as f64
}

/// Steered binary descriptors for keypoints at least 16 px from the border;
/// the rest are dropped.
pub fn orb_describe(img: &GrayImage, kps: &[Keypoint]) -> DescriptorSet {
    orb_describe_with(img, kps, true)
}

pub fn orb_describe_with(img: &GrayImage, kps: &[Keypoint], smooth: bool) -> DescriptorSet {
    let w = img.width();
    if img.width() <= 2 * BORDER || img.height() <= 2 * BORDER {
        return DescriptorSet::empty_binary();
    }
    let intensity = if smooth { box_sums(img) } else { img.pixels().to_vec() };
    let pairs = pattern();
    let mut keypoints = Vec::new();
    let mut codes = Vec::new();
    for kp in kps.iter().filter(|k| inside_border(img, k)) {
        let (cx, cy) = (kp.x.round() as isize, kp.y.round() as isize);
        let (c, s) = (kp.orientation.cos(), kp.orientation.sin());
        let sample = |(px, py): (i32, i32)| {
            let rx = (c * px as f64 - s * py as f64).round() as isize;
            let ry = (s * px as f64 + c * py as f64).round() as isize;
            intensity[((cy + ry) as usize) * w + (cx + rx) as usize]
        };
        let mut code = [0u8; ORB_BYTES];
        for (i, p) in pairs.iter().enumerate() {
            if sample(p.a) > sample(p.b) {
                code[i / 8] |= 0x80 >> (i % 8);
            }
        }
        keypoints.push(*kp);
        codes.push(code);
    }
    DescriptorSet {
        keypoints,
        vectors: DescriptorVectors::Binary(codes),
    }
}

/// FAST detection followed by description.
pub fn orb_detect_describe(img: &GrayImage, params: &OrbParams) -> Result<DescriptorSet, DescriptorError> {
    let mut kps = fast_detect(img, params.fast.threshold, params.fast.n_contig)?;
    kps.retain(|k| inside_border(img, k));
    if let Some(cap) = params.max_keypoints {
        kps.sort_by(|a, b| b.response.total_cmp(&a.response));
        kps.truncate(cap);
    }
    Ok(orb_describe_with(img, &kps, params.smooth))
}

pub fn hamming(a: &[u8; ORB_BYTES], b: &[u8; ORB_BYTES]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}
