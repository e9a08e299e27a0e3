use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{argmax_first, check_xy, ClassifyError};
use crate::codec::{BlobReader, BlobWriter, CodecError};
use crate::numerics::Matrix;
use crate::rng::{standard_normal, SeedStream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![64],
            epochs: 100,
            lr: 0.01,
            batch_size: 32,
        }
    }
}

/// Fully connected net. `weights[l]` is `sizes[l+1] × sizes[l]`; hidden
/// layers use ReLU and the output layer softmax.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    pub sizes: Vec<usize>,
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub activation: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpGradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpModel {
    /// He-initialized weights N(0, 2/fan_in), zero biases.
    pub fn init(sizes: &[usize], seed: u64) -> Self {
        let mut rng = SeedStream::new(seed).rng("mlp-init");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let scale = (2.0 / w[0] as f64).sqrt();
            weights.push(Matrix::from_fn(w[1], w[0], |_, _| scale * standard_normal(&mut rng)));
            biases.push(vec![0.0; w[1]]);
        }
        MlpModel {
            sizes: sizes.to_vec(),
            weights,
            biases,
            activation: "relu".into(),
        }
    }

    pub fn n_classes(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// Activations of every layer for one input; the last entry is the softmax.
    fn forward(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![input.to_vec()];
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let a = acts.last().unwrap();
            let mut z: Vec<f64> = (0..w.rows())
                .map(|i| b[i] + w.row(i).iter().zip(a).map(|(p, q)| p * q).sum::<f64>())
                .collect();
            if l == last {
                softmax_in_place(&mut z);
            } else {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            }
            acts.push(z);
        }
        acts
    }

    /// Softmax output rows.
    pub fn probabilities(&self, x: &Matrix) -> Result<Matrix, ClassifyError> {
        self.check_dim(x)?;
        let c = self.n_classes();
        let mut out = Matrix::zeros(x.rows(), c);
        for i in 0..x.rows() {
            out.row_mut(i).copy_from_slice(self.forward(x.row(i)).last().unwrap());
        }
        Ok(out)
    }

    fn check_dim(&self, x: &Matrix) -> Result<(), ClassifyError> {
        if x.cols() != self.sizes[0] {
            return Err(ClassifyError::DimensionMismatch {
                expected: self.sizes[0],
                got: x.cols(),
            });
        }
        Ok(())
    }

    fn zero_grads(&self) -> MlpGradients {
        MlpGradients {
            weights: self.weights.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub(crate) fn encode(&self, w: &mut BlobWriter) {
        w.usizes(&self.sizes);
        w.str(&self.activation);
        for (m, b) in self.weights.iter().zip(&self.biases) {
            w.matrix(m);
            w.f64s(b);
        }
    }

    pub(crate) fn decode(r: &mut BlobReader) -> Result<Self, CodecError> {
        let sizes = r.usizes()?;
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(CodecError::Invalid("mlp layer sizes".into()));
        }
        let activation = r.str()?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for s in sizes.windows(2) {
            let m = r.matrix()?;
            let b = r.f64s()?;
            if m.shape() != (s[1], s[0]) || b.len() != s[1] {
                return Err(CodecError::Invalid("mlp layer shapes do not chain".into()));
            }
            weights.push(m);
            biases.push(b);
        }
        Ok(MlpModel {
            sizes,
            weights,
            biases,
            activation,
        })
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
}

/// Mean cross-entropy over `rows` and its gradient.
fn batch_loss_and_grad(m: &MlpModel, x: &Matrix, y: &[usize], rows: &[usize]) -> (f64, MlpGradients) {
    let mut g = m.zero_grads();
    let mut loss = 0.0;
    let inv = 1.0 / rows.len() as f64;
    for &i in rows {
        let acts = m.forward(x.row(i));
        let out = acts.last().unwrap();
        loss -= out[y[i]].max(f64::MIN_POSITIVE).ln();
        // delta of the output pre-activation for softmax + cross-entropy
        let mut delta: Vec<f64> = out.clone();
        delta[y[i]] -= 1.0;
        for l in (0..m.weights.len()).rev() {
            let a = &acts[l];
            let gw = &mut g.weights[l];
            for (r, &d) in delta.iter().enumerate() {
                g.biases[l][r] += d * inv;
                for (gv, &av) in gw.row_mut(r).iter_mut().zip(a) {
                    *gv += d * av * inv;
                }
            }
            if l > 0 {
                let w = &m.weights[l];
                delta = (0..w.cols())
                    .map(|c| {
                        if a[c] > 0.0 {
                            (0..w.rows()).map(|r| w[(r, c)] * delta[r]).sum()
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
        }
    }
    (loss * inv, g)
}

/// Mean cross-entropy over all rows and the exact gradient with respect to
/// every weight and bias.
pub fn mlp_loss_and_grad(m: &MlpModel, x: &Matrix, y: &[usize]) -> Result<(f64, MlpGradients), ClassifyError> {
    check_xy(x, y)?;
    m.check_dim(x)?;
    if let Some(&bad) = y.iter().find(|&&c| c >= m.n_classes()) {
        return Err(ClassifyError::InvalidParameter(format!("label {bad} outside the output layer")));
    }
    let rows: Vec<usize> = (0..x.rows()).collect();
    Ok(batch_loss_and_grad(m, x, y, &rows))
}

/// Mini-batch SGD with a freshly shuffled order each epoch. Returns the model
/// and the full-data loss before training and after each epoch.
pub fn mlp_train(x: &Matrix, y: &[usize], params: &MlpParams, seed: u64) -> Result<(MlpModel, Vec<f64>), ClassifyError> {
    check_xy(x, y)?;
    if params.epochs == 0 {
        return Err(ClassifyError::InvalidParameter("epochs must be at least 1".into()));
    }
    if params.batch_size == 0 || params.hidden.contains(&0) || !(params.lr > 0.0 && params.lr.is_finite()) {
        return Err(ClassifyError::InvalidParameter(format!("{params:?}")));
    }
    if x.rows() == 0 {
        return Err(ClassifyError::TooFewSamples { need: 1, got: 0 });
    }
    let n_classes = y.iter().max().unwrap() + 1;
    let mut sizes = vec![x.cols()];
    sizes.extend(&params.hidden);
    sizes.push(n_classes);
    let stream = SeedStream::new(seed);
    let mut m = MlpModel::init(&sizes, stream.child("weights").seed());
    let mut rng = stream.rng("mlp-shuffle");
    let all: Vec<usize> = (0..x.rows()).collect();
    let mut history = vec![batch_loss_and_grad(&m, x, y, &all).0];
    let mut order = all.clone();
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(params.batch_size) {
            let (_, g) = batch_loss_and_grad(&m, x, y, batch);
            for (w, gw) in m.weights.iter_mut().zip(&g.weights) {
                for (p, q) in w.as_mut_slice().iter_mut().zip(gw.as_slice()) {
                    *p -= params.lr * q;
                }
            }
            for (b, gb) in m.biases.iter_mut().zip(&g.biases) {
                for (p, q) in b.iter_mut().zip(gb) {
                    *p -= params.lr * q;
                }
            }
        }
        history.push(batch_loss_and_grad(&m, x, y, &all).0);
    }
    Ok((m, history))
}

pub fn mlp_predict(m: &MlpModel, x: &Matrix) -> Result<Vec<usize>, ClassifyError> {
    let p = m.probabilities(x)?;
    Ok(p.row_iter().map(argmax_first).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_net_predicts_class_zero() {
        let mut m = MlpModel::init(&[3, 4, 5], 1);
        for w in &mut m.weights {
            w.as_mut_slice().fill(0.0);
        }
        let x = Matrix::from_fn(4, 3, |i, j| (i * j) as f64 - 2.0);
        assert_eq!(mlp_predict(&m, &x).unwrap(), vec![0; 4]);
        let p = m.probabilities(&x).unwrap();
        assert!(p.as_slice().iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn single_layer_matches_hand_arithmetic() {
        let mut m = MlpModel::init(&[3, 2], 0);
        m.weights[0] = Matrix::from_rows(&[[1.0, 0.0, -1.0], [0.5, 2.0, 0.0]]).unwrap();
        m.biases[0] = vec![0.25, -0.5];
        let x = Matrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        // logits: 1 - 3 + 0.25 = -1.75 ; 0.5 + 4 - 0.5 = 4.0
        let p = m.probabilities(&x).unwrap();
        let e = 1.0 / (1.0 + (-1.75f64 - 4.0).exp());
        assert!((p[(0, 1)] - e).abs() < 1e-14);
        assert!((p.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_epochs_rejected() {
        let p = MlpParams {
            epochs: 0,
            ..Default::default()
        };
        assert!(matches!(
            mlp_train(&Matrix::zeros(2, 1), &[0, 1], &p, 0),
            Err(ClassifyError::InvalidParameter(_))
        ));
    }
}
