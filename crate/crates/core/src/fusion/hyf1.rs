//! HYF1 per-image feature container.
//!
//! ```text
//! "HYF1" | version: u32 LE = 1 | N: u64 LE | D: u64 LE
//!        | N × (id_len: u16 LE, id: UTF-8)
//!        | N × D × f32 LE, row-major
//! ```

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use super::FusionError;
use crate::numerics::Matrix;

pub const MAGIC: [u8; 4] = *b"HYF1";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct DeepFeatureTable {
    pub ids: Vec<String>,
    pub vectors: Matrix,
}

impl DeepFeatureTable {
    pub fn new(ids: Vec<String>, vectors: Matrix) -> Result<Self, FusionError> {
        if ids.len() != vectors.rows() {
            return Err(FusionError::LengthMismatch {
                what: "ids".into(),
                expected: vectors.rows(),
                got: ids.len(),
            });
        }
        let mut seen = HashSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(FusionError::DuplicateId(id.clone()));
            }
            if id.len() > u16::MAX as usize {
                return Err(FusionError::Format(format!("id of {} bytes exceeds u16", id.len())));
            }
        }
        Ok(DeepFeatureTable { ids, vectors })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|i| i == id)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.len();
        let d = self.dim();
        let mut out = Vec::with_capacity(24 + n * (2 + 8) + n * d * 4);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(n as u64).to_le_bytes());
        out.extend_from_slice(&(d as u64).to_le_bytes());
        for id in &self.ids {
            out.extend_from_slice(&(id.len() as u16).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
        }
        for &v in self.vectors.as_slice() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FusionError> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8], FusionError> {
            let end = pos.checked_add(n).filter(|&e| e <= bytes.len()).ok_or(FusionError::TruncatedFile {
                offset: pos,
                len: bytes.len(),
            })?;
            let s = &bytes[pos..end];
            pos = end;
            Ok(s)
        };
        let magic = take(4)?;
        if magic != MAGIC {
            return Err(FusionError::BadMagic(magic.to_vec()));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(FusionError::UnsupportedVersion(version));
        }
        let n = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let d = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let n = usize::try_from(n).map_err(|_| FusionError::Format("N overflows usize".into()))?;
        let d = usize::try_from(d).map_err(|_| FusionError::Format("D overflows usize".into()))?;
        let mut ids = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let len = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
            let raw = take(len)?;
            let id = std::str::from_utf8(raw).map_err(|e| FusionError::Format(format!("id is not UTF-8: {e}")))?;
            ids.push(id.to_owned());
        }
        let count = n
            .checked_mul(d)
            .ok_or_else(|| FusionError::Format("N×D overflows usize".into()))?;
        let body = take(count.checked_mul(4).ok_or_else(|| FusionError::Format("body overflows".into()))?)?;
        let data: Vec<f64> = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        if pos != bytes.len() {
            return Err(FusionError::Format(format!("{} trailing bytes", bytes.len() - pos)));
        }
        let vectors = Matrix::from_vec(n, d, data).map_err(|e| FusionError::Format(e.to_string()))?;
        DeepFeatureTable::new(ids, vectors)
    }
}

pub fn load_deep_features(path: impl AsRef<Path>) -> Result<DeepFeatureTable, FusionError> {
    let bytes = std::fs::read(path)?;
    DeepFeatureTable::from_bytes(&bytes)
}

pub fn write_deep_features(table: &DeepFeatureTable, path: impl AsRef<Path>) -> Result<(), FusionError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&table.to_bytes())?;
    Ok(())
}
