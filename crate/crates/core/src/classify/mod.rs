//! Random forest, k-nearest-neighbor and multilayer-perceptron classifiers.

mod forest;
mod knn;
mod mlp;

pub use forest::{rf_predict, rf_train, DecisionTree, ForestModel, Node, RfParams};
pub use knn::{knn_predict, KnnModel, KnnParams};
pub use mlp::{mlp_loss_and_grad, mlp_predict, mlp_train, MlpGradients, MlpModel, MlpParams};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{BlobReader, BlobWriter, CodecError};
use crate::numerics::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("need at least {need} training rows, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("k = {k} exceeds the number of training rows ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

pub(crate) fn check_xy(x: &Matrix, y: &[usize]) -> Result<(), ClassifyError> {
    if x.rows() != y.len() {
        return Err(ClassifyError::LengthMismatch {
            rows: x.rows(),
            labels: y.len(),
        });
    }
    Ok(())
}

/// Index of the largest count; ties go to the smaller index.
pub(crate) fn argmax_first<T: PartialOrd + Copy>(v: &[T]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// Classifier choice and hyperparameters, as written in run configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierSpec {
    Rf(RfParams),
    Knn(KnnParams),
    Mlp(MlpParams),
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec::Rf(RfParams::default())
    }
}

impl ClassifierSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Rf(_) => "rf",
            ClassifierSpec::Knn(_) => "knn",
            ClassifierSpec::Mlp(_) => "mlp",
        }
    }

    pub fn train(&self, x: &Matrix, y: &[usize], seed: u64) -> Result<TrainedClassifier, ClassifyError> {
        Ok(match self {
            ClassifierSpec::Rf(p) => TrainedClassifier::Forest(rf_train(x, y, p, seed)?),
            ClassifierSpec::Knn(p) => TrainedClassifier::Knn(KnnModel::fit(x, y, p.k)?),
            ClassifierSpec::Mlp(p) => TrainedClassifier::Mlp(mlp_train(x, y, p, seed)?.0),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainedClassifier {
    Forest(ForestModel),
    Knn(KnnModel),
    Mlp(MlpModel),
}

const MAGIC: [u8; 4] = *b"HYFC";
const VERSION: u32 = 1;

impl TrainedClassifier {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>, ClassifyError> {
        match self {
            TrainedClassifier::Forest(m) => rf_predict(m, x),
            TrainedClassifier::Knn(m) => m.predict(x),
            TrainedClassifier::Mlp(m) => mlp_predict(m, x),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BlobWriter::new(MAGIC, VERSION);
        match self {
            TrainedClassifier::Forest(m) => {
                w.u8(0);
                m.encode(&mut w);
            }
            TrainedClassifier::Knn(m) => {
                w.u8(1);
                m.encode(&mut w);
            }
            TrainedClassifier::Mlp(m) => {
                w.u8(2);
                m.encode(&mut w);
            }
        }
        w.finish()
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, ClassifyError> {
        let (mut r, version) = BlobReader::open(b, MAGIC)?;
        if version != VERSION {
            return Err(CodecError::UnsupportedVersion(version).into());
        }
        let m = match r.u8()? {
            0 => TrainedClassifier::Forest(ForestModel::decode(&mut r)?),
            1 => TrainedClassifier::Knn(KnnModel::decode(&mut r)?),
            2 => TrainedClassifier::Mlp(MlpModel::decode(&mut r)?),
            t => return Err(CodecError::Invalid(format!("classifier tag {t}")).into()),
        };
        r.finish()?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_json_forms() {
        let s: ClassifierSpec = serde_json::from_str(r#"{"kind":"rf"}"#).unwrap();
        assert_eq!(s, ClassifierSpec::Rf(RfParams::default()));
        let s: ClassifierSpec = serde_json::from_str(r#"{"kind":"rf","max_depth":null}"#).unwrap();
        let ClassifierSpec::Rf(p) = s else { unreachable!() };
        assert_eq!(p.max_depth, None);
        let s: ClassifierSpec = serde_json::from_str(r#"{"kind":"knn","k":3}"#).unwrap();
        assert_eq!(s, ClassifierSpec::Knn(KnnParams { k: 3 }));
    }

    #[test]
    fn argmax_tie_goes_low() {
        assert_eq!(argmax_first(&[1, 3, 3]), 1);
        assert_eq!(argmax_first(&[0.25, 0.25]), 0);
    }
}
