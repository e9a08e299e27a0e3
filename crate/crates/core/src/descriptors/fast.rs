//! FAST segment-test corners with intensity-centroid orientation.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{DescriptorError, Keypoint};
use crate::dataset::GrayImage;

/// Bresenham circle of radius 3 as (dx, dy), clockwise from the top.
pub const CIRCLE: [(isize, isize); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

pub const CENTROID_RADIUS: isize = 15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FastParams {
    pub threshold: f64,
    pub n_contig: usize,
}

impl Default for FastParams {
    fn default() -> Self {
        FastParams {
            threshold: 20.0 / 255.0,
            n_contig: 9,
        }
    }
}

/// Segment-test score at (x, y), or `None` if the pixel is not a corner.
///
/// The score is the larger of the summed excess brightness/darkness over the
/// circle pixels that clear the threshold.
pub fn segment_test(img: &GrayImage, x: usize, y: usize, threshold: f64, n_contig: usize) -> Option<f64> {
    let p = img.get(y, x);
    let mut state = [0i8; 16];
    let mut vals = [0.0; 16];
    for (i, &(dx, dy)) in CIRCLE.iter().enumerate() {
        let v = img.get((y as isize + dy) as usize, (x as isize + dx) as usize);
        vals[i] = v;
        state[i] = if v > p + threshold {
            1
        } else if v < p - threshold {
            -1
        } else {
            0
        };
    }
    // An arc of n contiguous pixels covers at least n/4 of the compass points.
    let need = (n_contig / 4) as i32;
    let bright = [0, 4, 8, 12].iter().filter(|&&i| state[i] == 1).count() as i32;
    let dark = [0, 4, 8, 12].iter().filter(|&&i| state[i] == -1).count() as i32;
    if bright < need && dark < need {
        return None;
    }
    let has_arc = |target: i8| {
        let mut run = 0;
        for i in 0..32 {
            if state[i % 16] == target {
                run += 1;
                if run >= n_contig {
                    return true;
                }
            } else {
                run = 0;
            }
        }
        false
    };
    let is_bright = bright >= need && has_arc(1);
    let is_dark = dark >= need && has_arc(-1);
    if !is_bright && !is_dark {
        return None;
    }
    let mut sb = 0.0;
    let mut sd = 0.0;
    for i in 0..16 {
        match state[i] {
            1 => sb += vals[i] - p - threshold,
            -1 => sd += p - vals[i] - threshold,
            _ => {}
        }
    }
    Some(sb.max(sd))
}

/// Corner candidates before non-maximum suppression, as (x, y, score) in raster order.
pub fn fast_candidates(img: &GrayImage, threshold: f64, n_contig: usize) -> Vec<(usize, usize, f64)> {
    let (h, w) = (img.height(), img.width());
    let mut out = Vec::new();
    if h < 7 || w < 7 {
        return out;
    }
    for y in 3..h - 3 {
        for x in 3..w - 3 {
            if let Some(s) = segment_test(img, x, y, threshold, n_contig) {
                out.push((x, y, s));
            }
        }
    }
    out
}

pub fn fast_detect(img: &GrayImage, threshold: f64, n_contig: usize) -> Result<Vec<Keypoint>, DescriptorError> {
    if !(threshold > 0.0) || !(9..=12).contains(&n_contig) {
        return Err(DescriptorError::InvalidParameter(format!(
            "threshold={threshold}, n_contig={n_contig}"
        )));
    }
    let (h, w) = (img.height(), img.width());
    let cands = fast_candidates(img, threshold, n_contig);
    let mut score = vec![f64::NEG_INFINITY; h * w];
    for &(x, y, s) in &cands {
        score[y * w + x] = s;
    }
    let mut out = Vec::new();
    for &(x, y, s) in &cands {
        let here = y * w + x;
        let mut keep = true;
        'nbr: for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (ny, nx) = (y as isize + dy, x as isize + dx);
                if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                    continue;
                }
                let idx = ny as usize * w + nx as usize;
                let ns = score[idx];
                if ns > s || (ns == s && idx < here) {
                    keep = false;
                    break 'nbr;
                }
            }
        }
        if keep {
            out.push(Keypoint {
                x: x as f64,
                y: y as f64,
                scale: 3.0,
                orientation: intensity_centroid_angle(img, x, y),
                response: s,
            });
        }
    }
    Ok(out)
}

/// Angle of the intensity centroid over the disc of radius 15, in [0, 2π).
pub fn intensity_centroid_angle(img: &GrayImage, x: usize, y: usize) -> f64 {
    let (h, w) = (img.height() as isize, img.width() as isize);
    let (mut m10, mut m01) = (0.0, 0.0);
    let r2 = CENTROID_RADIUS * CENTROID_RADIUS;
    for dy in -CENTROID_RADIUS..=CENTROID_RADIUS {
        for dx in -CENTROID_RADIUS..=CENTROID_RADIUS {
            if dx * dx + dy * dy > r2 {
                continue;
            }
            let (yy, xx) = (y as isize + dy, x as isize + dx);
            if yy < 0 || xx < 0 || yy >= h || xx >= w {
                continue;
            }
            let v = img.get(yy as usize, xx as usize);
            m10 += dx as f64 * v;
            m01 += dy as f64 * v;
        }
    }
    let a = m01.atan2(m10).rem_euclid(TAU);
    if a >= TAU {
        0.0
    } else {
        a
    }
}
