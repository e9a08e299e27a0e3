//! FER-style CSV ingestion: `emotion,pixels,Usage` rows with 48×48 grayscale faces.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::Matrix;

pub const IMAGE_SIDE: usize = 48;
pub const NUM_CLASSES: usize = 8;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("label {label} out of range at line {line} (expected 0..{})", NUM_CLASSES - 1)]
    LabelOutOfRange { line: u64, label: i64 },
    #[error("standard deviation must be positive, got {0}")]
    ZeroStd(f64),
    #[error("image has {got} pixels, expected {height}x{width}")]
    BadImageSize { height: usize, width: usize, got: usize },
}

/// Single-channel image with intensities in [0, 1], row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self, DatasetError> {
        if pixels.len() != height * width {
            return Err(DatasetError::BadImageSize {
                height,
                width,
                got: pixels.len(),
            });
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(DatasetError::MalformedRow {
                line: 0,
                reason: "pixel outside [0, 1]".into(),
            });
        }
        Ok(GrayImage { height, width, pixels })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        GrayImage {
            height,
            width,
            pixels: vec![value.clamp(0.0, 1.0); height * width],
        }
    }

    /// Builds an image from arbitrary reals, clamping into [0, 1].
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(y, x).clamp(0.0, 1.0));
            }
        }
        GrayImage { height, width, pixels }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// 90° counter-clockwise rotation: pixel (y, x) moves to (w−1−x, y).
    pub fn rotate90(&self) -> GrayImage {
        let (h, w) = (self.height, self.width);
        let mut out = vec![0.0; h * w];
        for y in 0..h {
            for x in 0..w {
                out[(w - 1 - x) * h + y] = self.get(y, x);
            }
        }
        GrayImage {
            height: w,
            width: h,
            pixels: out,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GrayImage {
        GrayImage {
            height: self.height,
            width: self.width,
            pixels: self.pixels.iter().map(|&p| f(p).clamp(0.0, 1.0)).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, Default)]
pub struct LabeledDataset {
    pub images: Vec<GrayImage>,
    pub labels: Vec<usize>,
    pub split: Vec<Split>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn indices(&self, which: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == which).collect()
    }

    pub fn class_histogram(&self) -> [usize; NUM_CLASSES] {
        let mut h = [0; NUM_CLASSES];
        for &l in &self.labels {
            h[l] += 1;
        }
        h
    }

    /// Dataset-wide pixel mean and population standard deviation over one split.
    pub fn pixel_stats(&self, which: Split) -> PixelStats {
        let mut n = 0usize;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for (img, &s) in self.images.iter().zip(&self.split) {
            if s != which {
                continue;
            }
            for &p in img.pixels() {
                sum += p;
                sq += p * p;
            }
            n += img.pixels().len();
        }
        if n == 0 {
            return PixelStats { mean: 0.0, std: 1.0 };
        }
        let mean = sum / n as f64;
        let var = (sq / n as f64 - mean * mean).max(0.0);
        PixelStats { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelStats {
    pub mean: f64,
    pub std: f64,
}

pub fn load_fer_csv(path: impl AsRef<Path>) -> Result<LabeledDataset, DatasetError> {
    let file = std::fs::File::open(path)?;
    read_fer_csv(file, IMAGE_SIDE, IMAGE_SIDE)
}

/// Parses FER CSV from any reader. A header row is detected and skipped when
/// its first field is not an integer.
pub fn read_fer_csv<R: Read>(reader: R, height: usize, width: usize) -> Result<LabeledDataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut ds = LabeledDataset::default();
    let expected = height * width;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        if rec.len() < 2 {
            return Err(DatasetError::MalformedRow {
                line,
                reason: format!("expected 3 columns, found {}", rec.len()),
            });
        }
        let label: i64 = match rec[0].parse() {
            Ok(v) => v,
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(DatasetError::MalformedRow {
                    line,
                    reason: format!("label {:?} is not an integer", &rec[0]),
                })
            }
        };
        if !(0..NUM_CLASSES as i64).contains(&label) {
            return Err(DatasetError::LabelOutOfRange { line, label });
        }
        let mut pixels = Vec::with_capacity(expected);
        for tok in rec[1].split_ascii_whitespace() {
            let v: u8 = tok.parse().map_err(|_| DatasetError::MalformedRow {
                line,
                reason: format!("pixel {tok:?} is not an integer in 0..=255"),
            })?;
            pixels.push(v as f64 / 255.0);
        }
        if pixels.len() != expected {
            return Err(DatasetError::MalformedRow {
                line,
                reason: format!("{} pixels, expected {expected}", pixels.len()),
            });
        }
        let split = match rec.get(2) {
            Some("Training") => Split::Train,
            _ => Split::Test,
        };
        ds.images.push(GrayImage { height, width, pixels });
        ds.labels.push(label as usize);
        ds.split.push(split);
    }
    Ok(ds)
}

/// Writes FER CSV. Pixels are quantized back to 0..=255.
pub fn write_fer_csv<W: Write>(ds: &LabeledDataset, writer: W) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["emotion", "pixels", "Usage"])?;
    for ((img, label), split) in ds.images.iter().zip(&ds.labels).zip(&ds.split) {
        let pixels = img
            .pixels()
            .iter()
            .map(|p| ((p * 255.0).round() as u8).to_string())
            .collect::<Vec<_>>()
            .join(" ");
        let usage = match split {
            Split::Train => "Training",
            Split::Test => "PublicTest",
        };
        w.write_record([label.to_string().as_str(), pixels.as_str(), usage])?;
    }
    w.flush()?;
    Ok(())
}

/// `(img − mean) / std`, returned as an H×W matrix.
pub fn normalize(img: &GrayImage, mean: f64, std: f64) -> Result<Matrix, DatasetError> {
    if !(std > 0.0) {
        return Err(DatasetError::ZeroStd(std));
    }
    let data = img.pixels().iter().map(|p| (p - mean) / std).collect();
    Ok(Matrix::from_raw(img.height(), img.width(), data))
}
