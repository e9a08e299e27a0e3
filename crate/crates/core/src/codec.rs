//! Little-endian primitives for the versioned binary blobs (fitted reducers,
//! classifier models, cached feature matrices).

use thiserror::Error;

use crate::numerics::Matrix;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("blob truncated at byte {0}")]
    Truncated(usize),
    #[error("invalid blob content: {0}")]
    Invalid(String),
}

#[derive(Default)]
pub struct BlobWriter {
    buf: Vec<u8>,
}

impl BlobWriter {
    pub fn new(magic: [u8; 4], version: u32) -> Self {
        let mut w = BlobWriter { buf: Vec::new() };
        w.buf.extend_from_slice(&magic);
        w.u32(version);
        w
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.f64(x);
        }
    }

    pub fn usizes(&mut self, v: &[usize]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.u64(x as u64);
        }
    }

    pub fn matrix(&mut self, m: &Matrix) {
        self.u64(m.rows() as u64);
        self.u64(m.cols() as u64);
        for &x in m.as_slice() {
            self.f64(x);
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct BlobReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> BlobReader<'a> {
    /// Checks magic and returns the reader with the version.
    pub fn open(buf: &'a [u8], magic: [u8; 4]) -> Result<(Self, u32), CodecError> {
        let mut r = BlobReader { buf, pos: 0 };
        let found: [u8; 4] = r.take(4)?.try_into().unwrap();
        if found != magic {
            return Err(CodecError::BadMagic { expected: magic, found });
        }
        let version = r.u32()?;
        Ok((r, version))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let end = self.pos.checked_add(n).ok_or(CodecError::Truncated(self.pos))?;
        if end > self.buf.len() {
            return Err(CodecError::Truncated(self.pos));
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn usize(&mut self) -> Result<usize, CodecError> {
        usize::try_from(self.u64()?).map_err(|_| CodecError::Invalid("length overflows usize".into()))
    }

    pub fn f64(&mut self) -> Result<f64, CodecError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len_prefix(&mut self, elem: usize) -> Result<usize, CodecError> {
        let n = self.usize()?;
        if n.saturating_mul(elem) > self.buf.len() - self.pos {
            return Err(CodecError::Truncated(self.pos));
        }
        Ok(n)
    }

    pub fn str(&mut self) -> Result<String, CodecError> {
        let n = self.len_prefix(1)?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| CodecError::Invalid(e.to_string()))
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>, CodecError> {
        let n = self.len_prefix(8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn usizes(&mut self) -> Result<Vec<usize>, CodecError> {
        let n = self.len_prefix(8)?;
        (0..n).map(|_| self.usize()).collect()
    }

    pub fn matrix(&mut self) -> Result<Matrix, CodecError> {
        let rows = self.usize()?;
        let cols = self.usize()?;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| CodecError::Invalid("matrix size overflow".into()))?;
        if n.saturating_mul(8) > self.buf.len() - self.pos {
            return Err(CodecError::Truncated(self.pos));
        }
        let data = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>, _>>()?;
        Matrix::from_vec(rows, cols, data).map_err(|e| CodecError::Invalid(e.to_string()))
    }

    pub fn finish(self) -> Result<(), CodecError> {
        if self.pos != self.buf.len() {
            return Err(CodecError::Invalid(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_truncation() {
        let mut w = BlobWriter::new(*b"TEST", 1);
        w.str("hello");
        w.matrix(&Matrix::from_rows(&[[1.0, -2.5]]).unwrap());
        w.usizes(&[3, 4]);
        let bytes = w.finish();
        let (mut r, v) = BlobReader::open(&bytes, *b"TEST").unwrap();
        assert_eq!(v, 1);
        assert_eq!(r.str().unwrap(), "hello");
        assert_eq!(r.matrix().unwrap().as_slice(), &[1.0, -2.5]);
        assert_eq!(r.usizes().unwrap(), vec![3, 4]);
        r.finish().unwrap();

        let (mut r, _) = BlobReader::open(&bytes[..bytes.len() - 3], *b"TEST").unwrap();
        r.str().unwrap();
        r.matrix().unwrap();
        assert!(matches!(r.usizes(), Err(CodecError::Truncated(_))));
        assert!(matches!(BlobReader::open(&bytes, *b"NOPE"), Err(CodecError::BadMagic { .. })));
    }
}
