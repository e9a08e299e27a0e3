//! Handcrafted local features: SIFT over a DoG pyramid, ORB over FAST corners.

pub mod fast;
pub mod orb;
pub mod scale_space;
pub mod sift;

pub use fast::{fast_detect, FastParams};
pub use orb::{orb_describe, orb_detect_describe, OrbParams, ORB_BITS, ORB_BYTES};
pub use scale_space::{dog_pyramid, Plane, ScaleSpace};
pub use sift::{sift_detect_describe, sift_with_params, SiftParams, SIFT_DIM};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DescriptorError {
    #[error("image {height}x{width} too small for {octaves} octaves (minimum side 8 px)")]
    ImageTooSmall { height: usize, width: usize, octaves: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("bad ORB pattern: {0}")]
    BadPattern(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    /// Blur scale in input-image pixels.
    pub scale: f64,
    /// Radians in [0, 2π).
    pub orientation: f64,
    pub response: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DescriptorVectors {
    /// n×128 unit-norm SIFT rows.
    Real(Matrix),
    /// 256-bit ORB strings, bit `i` at byte `i / 8`, mask `0x80 >> (i % 8)`.
    Binary(Vec<[u8; ORB_BYTES]>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorSet {
    pub keypoints: Vec<Keypoint>,
    pub vectors: DescriptorVectors,
}

impl DescriptorSet {
    pub fn empty_real(dim: usize) -> Self {
        DescriptorSet {
            keypoints: Vec::new(),
            vectors: DescriptorVectors::Real(Matrix::zeros(0, dim)),
        }
    }

    pub fn empty_binary() -> Self {
        DescriptorSet {
            keypoints: Vec::new(),
            vectors: DescriptorVectors::Binary(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    /// Real-valued width of one row (ORB rows count bits).
    pub fn dim(&self) -> usize {
        match &self.vectors {
            DescriptorVectors::Real(m) => m.cols(),
            DescriptorVectors::Binary(_) => ORB_BITS,
        }
    }

    /// Rows as reals; ORB bits are unpacked MSB-first into {0, 1}.
    pub fn to_matrix(&self) -> Matrix {
        match &self.vectors {
            DescriptorVectors::Real(m) => m.clone(),
            DescriptorVectors::Binary(codes) => {
                let mut data = Vec::with_capacity(codes.len() * ORB_BITS);
                for c in codes {
                    data.extend(unpack_bits(c));
                }
                Matrix::from_raw(codes.len(), ORB_BITS, data)
            }
        }
    }
}

/// MSB-first binary expansion: `0xA5` → `[1,0,1,0,0,1,0,1]`.
pub fn unpack_bits(bytes: &[u8]) -> Vec<f64> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).map(move |i| ((b >> (7 - i)) & 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unpack_msb_first() {
        assert_eq!(unpack_bits(&[0xA5]), vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
    }
}
