//! Confusion matrices, accuracy and embedding-quality scores.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{nearest, Matrix, Metric};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("y_true has {truth} labels, y_pred has {pred}")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("label {label} at position {index} is not below {classes}")]
    LabelOutOfRange { index: usize, label: usize, classes: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
}

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class: usize,
    pub support: u64,
    /// `None` when nothing was predicted as this class.
    pub precision: Option<f64>,
    /// `None` when the class has no samples.
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], c: usize) -> Result<ConfusionMatrix, MetricsError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricsError::LengthMismatch {
            truth: y_true.len(),
            pred: y_pred.len(),
        });
    }
    let mut counts = vec![vec![0u64; c]; c];
    for (index, (&t, &p)) in y_true.iter().zip(y_pred).enumerate() {
        for label in [t, p] {
            if label >= c {
                return Err(MetricsError::LabelOutOfRange { index, label, classes: c });
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

impl ConfusionMatrix {
    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn per_class(&self) -> Vec<ClassStats> {
        let c = self.classes();
        (0..c)
            .map(|k| {
                let tp = self.counts[k][k] as f64;
                let support: u64 = self.counts[k].iter().sum();
                let predicted: u64 = (0..c).map(|t| self.counts[t][k]).sum();
                let precision = (predicted > 0).then(|| tp / predicted as f64);
                let recall = (support > 0).then(|| tp / support as f64);
                let f1 = match (precision, recall) {
                    (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
                    (Some(_), Some(_)) => Some(0.0),
                    _ => None,
                };
                ClassStats {
                    class: k,
                    support,
                    precision,
                    recall,
                    f1,
                }
            })
            .collect()
    }

    /// `true\pred` header row then one row per true class.
    pub fn to_csv(&self) -> String {
        let c = self.classes();
        let mut s = String::from("true\\pred");
        for p in 0..c {
            s.push_str(&format!(",{p}"));
        }
        s.push('\n');
        for (t, row) in self.counts.iter().enumerate() {
            s.push_str(&t.to_string());
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    Ok(cm.trace() as f64 / total as f64)
}

/// Fraction of rows whose nearest other row (Euclidean, ties to the smaller
/// index) has the same label.
pub fn knn_purity(y: &Matrix, labels: &[usize]) -> f64 {
    let n = y.rows();
    let hits = (0..n)
        .filter(|&i| {
            let (idx, _) = nearest(y, y.row(i), 1, Metric::Euclidean, Some(i));
            labels[idx[0]] == labels[i]
        })
        .count();
    hits as f64 / n as f64
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Pearson correlation of average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut num, mut da, mut db) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        num += (x - ma) * (y - mb);
        da += (x - ma) * (x - ma);
        db += (y - mb) * (y - mb);
    }
    num / (da * db).sqrt()
}
