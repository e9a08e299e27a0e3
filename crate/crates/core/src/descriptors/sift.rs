//! SIFT keypoints (3-D DoG extrema) and 4×4×8 gradient-orientation descriptors.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::scale_space::{dog_pyramid, Plane, ScaleSpace};
use super::{DescriptorError, DescriptorSet, DescriptorVectors, Keypoint};
use crate::dataset::GrayImage;
use crate::numerics::Matrix;

pub const SIFT_DIM: usize = 128;
const GRID: usize = 4;
const BINS: usize = 8;
const ORI_BINS: usize = 36;
const ORI_PEAK_RATIO: f64 = 0.8;
const DESCRIPTOR_CLIP: f64 = 0.2;
const MAX_REFINE_STEPS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiftParams {
    pub octaves: usize,
    pub scales_per_octave: usize,
    pub sigma0: f64,
    pub contrast_threshold: f64,
    /// Keep at most this many keypoints (strongest |DoG| first). `None` = uncapped.
    pub max_keypoints: Option<usize>,
}

impl Default for SiftParams {
    fn default() -> Self {
        SiftParams {
            octaves: 3,
            scales_per_octave: 3,
            sigma0: 1.6,
            contrast_threshold: 0.03,
            max_keypoints: None,
        }
    }
}

pub fn sift_detect_describe(img: &GrayImage) -> Result<DescriptorSet, DescriptorError> {
    sift_with_params(img, &SiftParams::default())
}

pub fn sift_with_params(img: &GrayImage, params: &SiftParams) -> Result<DescriptorSet, DescriptorError> {
    let ss = dog_pyramid(img, params.octaves, params.scales_per_octave, params.sigma0)?;
    let mut found: Vec<(Keypoint, Vec<f64>)> = Vec::new();
    for (o, _) in ss.octaves.iter().enumerate() {
        for ext in find_extrema(&ss, o, params.contrast_threshold) {
            let level = ext.level.round().clamp(0.0, (ss.scales_per_octave + 2) as f64) as usize;
            let gauss = &ss.octaves[o].gaussians[level];
            let sigma_oct = ss.level_sigma(ext.level);
            for theta in dominant_orientations(gauss, ext.x, ext.y, sigma_oct) {
                let Some(desc) = describe(gauss, ext.x, ext.y, sigma_oct, theta) else {
                    continue;
                };
                let scale = (1u64 << o) as f64;
                let kp = Keypoint {
                    x: (ext.x * scale).clamp(0.0, (img.width() - 1) as f64),
                    y: (ext.y * scale).clamp(0.0, (img.height() - 1) as f64),
                    scale: sigma_oct * scale,
                    orientation: theta,
                    response: ext.value,
                };
                found.push((kp, desc));
            }
        }
    }
    if let Some(cap) = params.max_keypoints {
        // Stable sort keeps detection order among equal responses.
        found.sort_by(|a, b| b.0.response.abs().total_cmp(&a.0.response.abs()));
        found.truncate(cap);
    }
    let mut data = Vec::with_capacity(found.len() * SIFT_DIM);
    let mut keypoints = Vec::with_capacity(found.len());
    for (kp, d) in found {
        keypoints.push(kp);
        data.extend(d);
    }
    let n = keypoints.len();
    Ok(DescriptorSet {
        keypoints,
        vectors: DescriptorVectors::Real(Matrix::from_raw(n, SIFT_DIM, data)),
    })
}

#[derive(Clone, Copy, Debug)]
struct Extremum {
    /// Octave pixel coordinates, sub-pixel.
    x: f64,
    y: f64,
    /// Fractional DoG level.
    level: f64,
    /// Interpolated DoG value.
    value: f64,
}

fn is_extremum(dogs: &[Plane], s: usize, y: usize, x: usize) -> bool {
    let v = dogs[s].get(y, x);
    let (mut is_max, mut is_min) = (true, true);
    for ss in s - 1..=s + 1 {
        for yy in y - 1..=y + 1 {
            for xx in x - 1..=x + 1 {
                if ss == s && yy == y && xx == x {
                    continue;
                }
                let n = dogs[ss].get(yy, xx);
                is_max &= v > n;
                is_min &= v < n;
                if !is_max && !is_min {
                    return false;
                }
            }
        }
    }
    is_max || is_min
}

fn find_extrema(ss: &ScaleSpace, o: usize, threshold: f64) -> Vec<Extremum> {
    let dogs = &ss.octaves[o].dogs;
    let Some(first) = dogs.first() else {
        return Vec::new();
    };
    let (h, w) = (first.height, first.width);
    let mut out = Vec::new();
    if h < 3 || w < 3 {
        return out;
    }
    for s in 1..=ss.scales_per_octave {
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                if dogs[s].get(y, x).abs() < 0.5 * threshold {
                    continue;
                }
                if !is_extremum(dogs, s, y, x) {
                    continue;
                }
                if let Some(e) = refine(dogs, s, y, x, ss.scales_per_octave) {
                    if e.value.abs() >= threshold {
                        out.push(e);
                    }
                }
            }
        }
    }
    out
}

/// Quadratic sub-pixel/sub-scale refinement. Returns `None` if the fit drifts off the grid.
fn refine(dogs: &[Plane], s0: usize, y0: usize, x0: usize, spo: usize) -> Option<Extremum> {
    let (h, w) = (dogs[0].height, dogs[0].width);
    let (mut s, mut y, mut x) = (s0, y0, x0);
    for _ in 0..MAX_REFINE_STEPS {
        let d = |ds: isize, dy: isize, dx: isize| {
            dogs[(s as isize + ds) as usize].get((y as isize + dy) as usize, (x as isize + dx) as usize)
        };
        let v = d(0, 0, 0);
        let g = [
            0.5 * (d(0, 0, 1) - d(0, 0, -1)),
            0.5 * (d(0, 1, 0) - d(0, -1, 0)),
            0.5 * (d(1, 0, 0) - d(-1, 0, 0)),
        ];
        let dxx = d(0, 0, 1) + d(0, 0, -1) - 2.0 * v;
        let dyy = d(0, 1, 0) + d(0, -1, 0) - 2.0 * v;
        let dss = d(1, 0, 0) + d(-1, 0, 0) - 2.0 * v;
        let dxy = 0.25 * (d(0, 1, 1) - d(0, 1, -1) - d(0, -1, 1) + d(0, -1, -1));
        let dxs = 0.25 * (d(1, 0, 1) - d(1, 0, -1) - d(-1, 0, 1) + d(-1, 0, -1));
        let dys = 0.25 * (d(1, 1, 0) - d(1, -1, 0) - d(-1, 1, 0) + d(-1, -1, 0));
        let hess = [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]];
        let off = solve3(&hess, &g).map(|o| [-o[0], -o[1], -o[2]])?;
        if off.iter().all(|c| c.abs() < 0.5) {
            let value = v + 0.5 * (g[0] * off[0] + g[1] * off[1] + g[2] * off[2]);
            return Some(Extremum {
                x: x as f64 + off[0],
                y: y as f64 + off[1],
                level: s as f64 + off[2],
                value,
            });
        }
        let nx = x as isize + off[0].round() as isize;
        let ny = y as isize + off[1].round() as isize;
        let ns = s as isize + off[2].round() as isize;
        if ns < 1 || ns > spo as isize || ny < 1 || ny >= h as isize - 1 || nx < 1 || nx >= w as isize - 1 {
            return None;
        }
        (s, y, x) = (ns as usize, ny as usize, nx as usize);
    }
    None
}

fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut m = *a;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        let dc = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        *o = dc / det;
    }
    Some(out)
}

#[inline]
fn gradient(p: &Plane, y: usize, x: usize) -> (f64, f64) {
    let dx = p.get(y, x + 1) - p.get(y, x - 1);
    let dy = p.get(y + 1, x) - p.get(y - 1, x);
    (dx, dy)
}

fn dominant_orientations(gauss: &Plane, kx: f64, ky: f64, sigma: f64) -> Vec<f64> {
    let (h, w) = (gauss.height as isize, gauss.width as isize);
    let (cx, cy) = (kx.round() as isize, ky.round() as isize);
    let sw = 1.5 * sigma;
    let radius = (3.0 * sw).round() as isize;
    let mut hist = [0.0f64; ORI_BINS];
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let (y, x) = (cy + dy, cx + dx);
            if y < 1 || y >= h - 1 || x < 1 || x >= w - 1 {
                continue;
            }
            let (gx, gy) = gradient(gauss, y as usize, x as usize);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let weight = (-((dx * dx + dy * dy) as f64) / (2.0 * sw * sw)).exp();
            let ori = gy.atan2(gx).rem_euclid(TAU);
            let bin = ((ori / TAU * ORI_BINS as f64).floor() as usize) % ORI_BINS;
            hist[bin] += weight * mag;
        }
    }
    for _ in 0..2 {
        let prev = hist;
        for i in 0..ORI_BINS {
            hist[i] = 0.25 * prev[(i + ORI_BINS - 1) % ORI_BINS] + 0.5 * prev[i] + 0.25 * prev[(i + 1) % ORI_BINS];
        }
    }
    let max = hist.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for i in 0..ORI_BINS {
        let l = hist[(i + ORI_BINS - 1) % ORI_BINS];
        let r = hist[(i + 1) % ORI_BINS];
        let c = hist[i];
        if c > l && c > r && c >= ORI_PEAK_RATIO * max {
            let offset = 0.5 * (l - r) / (l - 2.0 * c + r);
            let theta = ((i as f64 + 0.5 + offset) / ORI_BINS as f64 * TAU).rem_euclid(TAU);
            out.push(if theta >= TAU { 0.0 } else { theta });
        }
    }
    out
}

fn describe(gauss: &Plane, kx: f64, ky: f64, sigma: f64, theta: f64) -> Option<Vec<f64>> {
    let (h, w) = (gauss.height as isize, gauss.width as isize);
    let (cx, cy) = (kx.round() as isize, ky.round() as isize);
    let hist_w = 3.0 * sigma;
    let half = GRID as f64 / 2.0;
    let radius = (hist_w * std::f64::consts::SQRT_2 * (GRID as f64 + 1.0) * 0.5).round() as isize;
    let radius = radius.min(((h * h + w * w) as f64).sqrt() as isize);
    let (cos_t, sin_t) = (theta.cos(), theta.sin());
    // (GRID+2)^2 × BINS with a guard ring so trilinear splatting needs no bounds checks.
    let g2 = GRID + 2;
    let mut hist = vec![0.0f64; g2 * g2 * BINS];
    for i in -radius..=radius {
        for j in -radius..=radius {
            let x_rot = (j as f64 * cos_t + i as f64 * sin_t) / hist_w;
            let y_rot = (-j as f64 * sin_t + i as f64 * cos_t) / hist_w;
            let rbin = y_rot + half - 0.5;
            let cbin = x_rot + half - 0.5;
            if rbin <= -1.0 || rbin >= GRID as f64 || cbin <= -1.0 || cbin >= GRID as f64 {
                continue;
            }
            let (y, x) = (cy + i, cx + j);
            if y < 1 || y >= h - 1 || x < 1 || x >= w - 1 {
                continue;
            }
            let (gx, gy) = gradient(gauss, y as usize, x as usize);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let ori = (gy.atan2(gx) - theta).rem_euclid(TAU);
            let obin = ori / TAU * BINS as f64;
            let weight = (-(x_rot * x_rot + y_rot * y_rot) / (2.0 * half * half)).exp();
            splat(&mut hist, rbin, cbin, obin, weight * mag);
        }
    }
    let mut v = Vec::with_capacity(SIFT_DIM);
    for r in 1..=GRID {
        for c in 1..=GRID {
            let base = (r * g2 + c) * BINS;
            v.extend_from_slice(&hist[base..base + BINS]);
        }
    }
    clip_normalize(&mut v, DESCRIPTOR_CLIP).then_some(v)
}

fn splat(hist: &mut [f64], rbin: f64, cbin: f64, obin: f64, val: f64) {
    let g2 = GRID + 2;
    let (r0, c0, o0) = (rbin.floor(), cbin.floor(), obin.floor());
    let (dr, dc, d_o) = (rbin - r0, cbin - c0, obin - o0);
    let (r0, c0) = ((r0 as isize + 1) as usize, (c0 as isize + 1) as usize);
    let o0 = o0 as usize % BINS;
    for (ri, wr) in [(0, 1.0 - dr), (1, dr)] {
        for (ci, wc) in [(0, 1.0 - dc), (1, dc)] {
            for (oi, wo) in [(0, 1.0 - d_o), (1, d_o)] {
                let idx = ((r0 + ri) * g2 + (c0 + ci)) * BINS + (o0 + oi) % BINS;
                hist[idx] += val * wr * wc * wo;
            }
        }
    }
}

/// Scales `v` to unit norm with every entry at most `clip`.
///
/// Entries above the cap are pinned to it and the remainder rescaled so the
/// norm stays 1 (the fixed point of repeated clip-and-renormalize). Returns
/// `false` when no such vector exists: fewer than `1/clip²` nonzero entries.
pub fn clip_normalize(v: &mut [f64], clip: f64) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    let nonzero = v.iter().filter(|&&x| x > 0.0).count();
    if (nonzero as f64) * clip * clip < 1.0 - 1e-12 {
        return false;
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    // Suffix sums of squares over the sorted entries.
    let mut tail = vec![0.0; v.len() + 1];
    for i in (0..v.len()).rev() {
        tail[i] = tail[i + 1] + v[order[i]] * v[order[i]];
    }
    for m in 0..v.len() {
        let rest = 1.0 - m as f64 * clip * clip;
        if rest <= 0.0 || tail[m] <= 0.0 {
            break;
        }
        let lambda = (rest / tail[m]).sqrt();
        if lambda * v[order[m]] <= clip {
            for (rank, &i) in order.iter().enumerate() {
                v[i] = if rank < m { clip } else { v[i] * lambda };
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_normalize_caps_and_keeps_unit_norm() {
        let mut v: Vec<f64> = (0..128).map(|i| if i < 4 { 10.0 } else { 1.0 + (i % 7) as f64 * 0.1 }).collect();
        assert!(clip_normalize(&mut v, 0.2));
        let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-12);
        assert!(v.iter().all(|&x| x <= 0.2 + 1e-12));
        assert!((v[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn clip_normalize_rejects_sparse() {
        let mut v = vec![0.0; 128];
        v[..10].iter_mut().for_each(|x| *x = 1.0);
        assert!(!clip_normalize(&mut v, 0.2));
        assert!(!clip_normalize(&mut vec![0.0; 128], 0.2));
    }

    #[test]
    fn constant_image_has_no_keypoints() {
        let ds = sift_detect_describe(&GrayImage::filled(48, 48, 0.6)).unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.dim(), SIFT_DIM);
    }
}
