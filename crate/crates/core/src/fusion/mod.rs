//! Multi-source fusion: flattened local descriptors and external deep features
//! concatenated into one fixed-length vector per image.

mod hyf1;

pub use hyf1::{load_deep_features, write_deep_features, DeepFeatureTable};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptors::DescriptorSet;
use crate::numerics::Matrix;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic {0:?}, expected \"HYF1\"")]
    BadMagic(Vec<u8>),
    #[error("unsupported HYF1 version {0}")]
    UnsupportedVersion(u32),
    #[error("file truncated at byte {offset} of {len}")]
    TruncatedFile { offset: usize, len: usize },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("malformed feature file: {0}")]
    Format(String),
    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch { what: String, expected: usize, got: usize },
    #[error("no sources enabled")]
    NoSources,
}

/// Feature sources, in concatenation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Vgg,
    Sift,
    Orb,
}

impl Source {
    pub const ALL: [Source; 3] = [Source::Vgg, Source::Sift, Source::Orb];

    pub fn name(self) -> &'static str {
        match self {
            Source::Vgg => "vgg",
            Source::Sift => "sift",
            Source::Orb => "orb",
        }
    }
}

/// Row-major flattening, R^{n×d} → R^{n·d}. ORB bits are unpacked first.
pub fn flatten(ds: &DescriptorSet) -> Vec<f64> {
    ds.to_matrix().into_vec()
}

pub fn flatten_matrix(m: &Matrix) -> Vec<f64> {
    m.as_slice().to_vec()
}

/// Flattens into exactly `rows × dim` values, zero-padding missing rows.
pub fn flatten_padded(ds: &DescriptorSet, rows: usize) -> Vec<f64> {
    let dim = ds.dim();
    let mut v = flatten(ds);
    v.resize(rows * dim, 0.0);
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub source: Source,
    pub offset: usize,
    pub len: usize,
}

/// Block boundaries of a fused vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionLayout {
    pub blocks: Vec<Block>,
}

impl FusionLayout {
    /// Blocks in the fixed [vgg, sift, orb] order, disabled sources omitted.
    pub fn new(lengths: &[(Source, usize)]) -> Result<Self, FusionError> {
        let mut sorted = lengths.to_vec();
        sorted.sort_by_key(|(s, _)| *s);
        sorted.dedup_by_key(|(s, _)| *s);
        if sorted.is_empty() {
            return Err(FusionError::NoSources);
        }
        let mut offset = 0;
        let blocks = sorted
            .into_iter()
            .map(|(source, len)| {
                let b = Block { source, offset, len };
                offset += len;
                b
            })
            .collect();
        Ok(FusionLayout { blocks })
    }

    pub fn total_len(&self) -> usize {
        self.blocks.iter().map(|b| b.len).sum()
    }

    pub fn sources(&self) -> Vec<Source> {
        self.blocks.iter().map(|b| b.source).collect()
    }

    pub fn block(&self, s: Source) -> Option<&Block> {
        self.blocks.iter().find(|b| b.source == s)
    }
}

/// Per-column affine standardization fitted on training rows. Constant
/// columns map to 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnStandardizer {
    pub mean: Vec<f64>,
    /// 0 marks a constant column.
    pub std: Vec<f64>,
}

impl ColumnStandardizer {
    pub fn fit(x: &Matrix) -> Self {
        let mean = x.column_means();
        let mut var = vec![0.0; x.cols()];
        for r in x.row_iter() {
            for ((v, &m), &xv) in var.iter_mut().zip(&mean).zip(r) {
                *v += (xv - m) * (xv - m);
            }
        }
        let n = x.rows().max(1) as f64;
        let std = var
            .into_iter()
            .zip(&mean)
            .map(|(v, m)| {
                let s = (v / n).sqrt();
                if s <= 1e-12 * (1.0 + m.abs()) {
                    0.0
                } else {
                    s
                }
            })
            .collect();
        ColumnStandardizer { mean, std }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| if *s == 0.0 { 0.0 } else { (x - m) / s })
            .collect()
    }

    /// Inverse of [`apply`](Self::apply); constant columns come back as their mean.
    pub fn invert(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(z, (m, s))| z * s + m)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusedFeature {
    pub vector: Vec<f64>,
    pub layout: FusionLayout,
}

/// Fitted fusion: the layout plus one standardizer per block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    pub layout: FusionLayout,
    pub standardizers: Vec<ColumnStandardizer>,
}

/// Per-source feature matrices for a set of images, one row per image.
#[derive(Clone, Debug, Default)]
pub struct SourceMatrices {
    pub vgg: Option<Matrix>,
    pub sift: Option<Matrix>,
    pub orb: Option<Matrix>,
}

impl SourceMatrices {
    pub fn get(&self, s: Source) -> Option<&Matrix> {
        match s {
            Source::Vgg => self.vgg.as_ref(),
            Source::Sift => self.sift.as_ref(),
            Source::Orb => self.orb.as_ref(),
        }
    }

    pub fn set(&mut self, s: Source, m: Matrix) {
        match s {
            Source::Vgg => self.vgg = Some(m),
            Source::Sift => self.sift = Some(m),
            Source::Orb => self.orb = Some(m),
        }
    }
}

impl FusionModel {
    /// Fits block standardizers on the rows listed in `train`.
    pub fn fit(sources: &SourceMatrices, enabled: &[Source], train: &[usize]) -> Result<Self, FusionError> {
        let mut lengths = Vec::new();
        for &s in enabled {
            let m = sources.get(s).ok_or_else(|| FusionError::LengthMismatch {
                what: format!("{} block missing", s.name()),
                expected: 1,
                got: 0,
            })?;
            lengths.push((s, m.cols()));
        }
        let layout = FusionLayout::new(&lengths)?;
        let standardizers = layout
            .blocks
            .iter()
            .map(|b| ColumnStandardizer::fit(&sources.get(b.source).unwrap().select_rows(train)))
            .collect();
        Ok(FusionModel { layout, standardizers })
    }

    /// Standardizes and concatenates one image's blocks. Sources not in the
    /// layout are ignored; enabled ones must have their fitted length.
    pub fn fuse(&self, deep: Option<&[f64]>, sift: Option<&[f64]>, orb: Option<&[f64]>) -> Result<FusedFeature, FusionError> {
        let mut vector = Vec::with_capacity(self.layout.total_len());
        for (b, st) in self.layout.blocks.iter().zip(&self.standardizers) {
            let part = match b.source {
                Source::Vgg => deep,
                Source::Sift => sift,
                Source::Orb => orb,
            };
            let part = part.ok_or_else(|| FusionError::LengthMismatch {
                what: format!("{} block", b.source.name()),
                expected: b.len,
                got: 0,
            })?;
            if part.len() != b.len {
                return Err(FusionError::LengthMismatch {
                    what: format!("{} block", b.source.name()),
                    expected: b.len,
                    got: part.len(),
                });
            }
            vector.extend(st.apply(part));
        }
        Ok(FusedFeature {
            vector,
            layout: self.layout.clone(),
        })
    }

    /// Fuses every row into an N×D_m matrix.
    pub fn fuse_all(&self, sources: &SourceMatrices) -> Result<Matrix, FusionError> {
        let n = self
            .layout
            .blocks
            .first()
            .and_then(|b| sources.get(b.source))
            .map_or(0, |m| m.rows());
        let mut data = Vec::with_capacity(n * self.layout.total_len());
        for i in 0..n {
            let row = |s: Source| sources.get(s).map(|m| m.row(i));
            let f = self.fuse(row(Source::Vgg), row(Source::Sift), row(Source::Orb))?;
            data.extend(f.vector);
        }
        Ok(Matrix::from_raw(n, self.layout.total_len(), data))
    }

    /// Splits a fused vector into blocks and undoes the standardization.
    pub fn destandardize(&self, fused: &[f64]) -> Vec<(Source, Vec<f64>)> {
        self.layout
            .blocks
            .iter()
            .zip(&self.standardizers)
            .map(|(b, st)| (b.source, st.invert(&fused[b.offset..b.offset + b.len])))
            .collect()
    }
}
