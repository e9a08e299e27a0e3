//! Gaussian and Difference-of-Gaussian scale space.

use super::DescriptorError;
use crate::dataset::GrayImage;

pub const MIN_OCTAVE_SIDE: usize = 8;

/// Real-valued single-channel raster.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn zeros(height: usize, width: usize) -> Self {
        Plane {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_image(img: &GrayImage) -> Self {
        Plane {
            width: img.width(),
            height: img.height(),
            data: img.pixels().to_vec(),
        }
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    fn get_clamped(&self, y: isize, x: isize) -> f64 {
        let y = y.clamp(0, self.height as isize - 1) as usize;
        let x = x.clamp(0, self.width as isize - 1) as usize;
        self.get(y, x)
    }

    pub fn sub(&self, other: &Plane) -> Plane {
        debug_assert_eq!((self.width, self.height), (other.width, other.height));
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Keeps every second pixel in both directions.
    pub fn decimate(&self) -> Plane {
        let (h, w) = (self.height / 2, self.width / 2);
        let mut out = Plane::zeros(h, w);
        for y in 0..h {
            for x in 0..w {
                out.data[y * w + x] = self.get(2 * y, 2 * x);
            }
        }
        out
    }
}

/// Normalized 1-D Gaussian taps, truncated at 4σ.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur with edge replication.
pub fn gaussian_blur(src: &Plane, sigma: f64) -> Plane {
    if sigma <= 0.0 {
        return src.clone();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (h, w) = (src.height, src.width);
    let mut tmp = Plane::zeros(h, w);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &kv) in k.iter().enumerate() {
                acc += kv * src.get_clamped(y as isize, x as isize + i as isize - r);
            }
            tmp.data[y * w + x] = acc;
        }
    }
    let mut out = Plane::zeros(h, w);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &kv) in k.iter().enumerate() {
                acc += kv * tmp.get_clamped(y as isize + i as isize - r, x as isize);
            }
            out.data[y * w + x] = acc;
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct Octave {
    /// Gaussian levels; level `s` has blur `sigma0 · k^s` in this octave's pixel units.
    pub gaussians: Vec<Plane>,
    /// `dogs[s] = gaussians[s + 1] − gaussians[s]`.
    pub dogs: Vec<Plane>,
}

#[derive(Clone, Debug)]
pub struct ScaleSpace {
    pub octaves: Vec<Octave>,
    pub sigma0: f64,
    pub scales_per_octave: usize,
}

impl ScaleSpace {
    pub fn k(&self) -> f64 {
        2f64.powf(1.0 / self.scales_per_octave as f64)
    }

    /// Blur of level `s` relative to its octave.
    pub fn level_sigma(&self, s: f64) -> f64 {
        self.sigma0 * 2f64.powf(s / self.scales_per_octave as f64)
    }

    pub fn dog_planes(&self) -> impl Iterator<Item = &Plane> {
        self.octaves.iter().flat_map(|o| o.dogs.iter())
    }
}

/// Builds the Gaussian/DoG pyramid with `scales_per_octave + 3` Gaussian levels per octave.
///
/// In octave 0 every level is the input blurred directly at `sigma0 · k^s`, so a
/// DoG plane is exactly `G(kσ) * I − G(σ) * I`. Later octaves start from the
/// decimated `2·sigma0` level of the previous octave and blur incrementally to
/// the same relative scales.
pub fn dog_pyramid(
    img: &GrayImage,
    octaves: usize,
    scales_per_octave: usize,
    sigma0: f64,
) -> Result<ScaleSpace, DescriptorError> {
    if octaves == 0 || scales_per_octave == 0 || !(sigma0 > 0.0) {
        return Err(DescriptorError::InvalidParameter(format!(
            "octaves={octaves}, scales_per_octave={scales_per_octave}, sigma0={sigma0}"
        )));
    }
    let smallest = img.height().min(img.width()) >> (octaves - 1);
    if smallest < MIN_OCTAVE_SIDE {
        return Err(DescriptorError::ImageTooSmall {
            height: img.height(),
            width: img.width(),
            octaves,
        });
    }
    // Offset to zero minimum: later arithmetic then sees identical inputs for
    // images that differ by a representable brightness shift.
    let lo = img.pixels().iter().copied().fold(f64::INFINITY, f64::min);
    let mut base = Plane::from_image(img);
    base.data.iter_mut().for_each(|v| *v -= lo);

    let n_levels = scales_per_octave + 3;
    let k = 2f64.powf(1.0 / scales_per_octave as f64);
    let sigmas: Vec<f64> = (0..n_levels).map(|s| sigma0 * k.powi(s as i32)).collect();
    let mut out = Vec::with_capacity(octaves);
    for o in 0..octaves {
        let gaussians: Vec<Plane> = if o == 0 {
            sigmas.iter().map(|&s| gaussian_blur(&base, s)).collect()
        } else {
            sigmas
                .iter()
                .enumerate()
                .map(|(s, &sig)| {
                    if s == 0 {
                        base.clone()
                    } else {
                        gaussian_blur(&base, (sig * sig - sigma0 * sigma0).sqrt())
                    }
                })
                .collect()
        };
        let dogs = gaussians.windows(2).map(|w| w[1].sub(&w[0])).collect();
        base = gaussians[scales_per_octave].decimate();
        out.push(Octave { gaussians, dogs });
    }
    Ok(ScaleSpace {
        octaves: out,
        sigma0,
        scales_per_octave,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_normalized_and_truncated() {
        let k = gaussian_kernel(1.6);
        assert_eq!(k.len(), 2 * 7 + 1);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_image_gives_zero_dog() {
        let img = GrayImage::filled(48, 48, 0.37);
        let ss = dog_pyramid(&img, 3, 3, 1.6).unwrap();
        assert_eq!(ss.octaves.len(), 3);
        for p in ss.dog_planes() {
            assert!(p.data.iter().all(|&v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn too_many_octaves() {
        let img = GrayImage::filled(48, 48, 0.0);
        assert!(matches!(dog_pyramid(&img, 4, 3, 1.6), Err(DescriptorError::ImageTooSmall { .. })));
        assert!(dog_pyramid(&img, 0, 3, 1.6).is_err());
    }
}
