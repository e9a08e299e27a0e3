use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax_first, check_xy, ClassifyError};
use crate::codec::{BlobReader, BlobWriter, CodecError};
use crate::numerics::{nearest, Matrix, Metric};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

/// Stored training set; prediction is a Euclidean majority vote.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnModel {
    pub train_x: Matrix,
    pub train_y: Vec<usize>,
    pub k: usize,
    pub n_classes: usize,
}

impl KnnModel {
    pub fn fit(x: &Matrix, y: &[usize], k: usize) -> Result<Self, ClassifyError> {
        check_xy(x, y)?;
        if k == 0 {
            return Err(ClassifyError::InvalidParameter("k must be at least 1".into()));
        }
        if k > x.rows() {
            return Err(ClassifyError::KTooLarge { k, n: x.rows() });
        }
        Ok(KnnModel {
            train_x: x.clone(),
            train_y: y.to_vec(),
            k,
            n_classes: y.iter().max().map_or(0, |m| m + 1),
        })
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>, ClassifyError> {
        if x.cols() != self.train_x.cols() {
            return Err(ClassifyError::DimensionMismatch {
                expected: self.train_x.cols(),
                got: x.cols(),
            });
        }
        Ok((0..x.rows())
            .into_par_iter()
            .map(|i| {
                // `nearest` orders by (distance, index), which is the distance tie rule.
                let (idx, _) = nearest(&self.train_x, x.row(i), self.k, Metric::Euclidean, None);
                let mut votes = vec![0usize; self.n_classes];
                for j in idx {
                    votes[self.train_y[j]] += 1;
                }
                argmax_first(&votes)
            })
            .collect())
    }

    pub(crate) fn encode(&self, w: &mut BlobWriter) {
        w.usize(self.k);
        w.usize(self.n_classes);
        w.matrix(&self.train_x);
        w.usizes(&self.train_y);
    }

    pub(crate) fn decode(r: &mut BlobReader) -> Result<Self, CodecError> {
        let k = r.usize()?;
        let n_classes = r.usize()?;
        let train_x = r.matrix()?;
        let train_y = r.usizes()?;
        if train_y.len() != train_x.rows() || train_y.iter().any(|&c| c >= n_classes) || k > train_y.len() {
            return Err(CodecError::Invalid("inconsistent knn model".into()));
        }
        Ok(KnnModel {
            train_x,
            train_y,
            k,
            n_classes,
        })
    }
}

pub fn knn_predict(train_x: &Matrix, train_y: &[usize], query: &Matrix, k: usize) -> Result<Vec<usize>, ClassifyError> {
    KnnModel::fit(train_x, train_y, k)?.predict(query)
}
