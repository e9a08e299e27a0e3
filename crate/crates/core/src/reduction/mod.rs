//! Dimensionality reduction behind one fit/transform interface.

mod isomap;
mod lle;
mod mds;
mod pca;
mod serial;
mod tsne;
mod umap;

pub use isomap::isomap_fit;
pub use lle::{lle_fit, lle_weights, LleWeights};
pub use mds::{classical_mds, mds_embed, mds_embed_distances, stress};
pub use pca::{pca_fit, pca_inverse};
pub use tsne::{joint_probabilities, kl_divergence, kl_gradient, tsne_embed};
pub use umap::{fit_ab, fuzzy_graph, umap_fit, FuzzyGraph};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::CodecError;
use crate::numerics::{nearest, Matrix, Metric, NumericsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReductionError {
    #[error("target dimension {d} invalid for {input}-dimensional input")]
    InvalidDim { d: usize, input: usize },
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("all input rows are identical")]
    DegenerateInput,
    #[error("perplexity {perplexity} must be below (N-1)/3 = {max}")]
    PerplexityTooLarge { perplexity: f64, max: f64 },
    #[error("n_neighbors = {k} must be below the number of points ({n})")]
    NeighborsTooLarge { k: usize, n: usize },
    #[error("expected {expected} input columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pca,
    Tsne,
    Umap,
    Isomap,
    Mds,
    Lle,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::Pca, Method::Tsne, Method::Umap, Method::Isomap, Method::Mds, Method::Lle];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pca => "pca",
            Method::Tsne => "tsne",
            Method::Umap => "umap",
            Method::Isomap => "isomap",
            Method::Mds => "mds",
            Method::Lle => "lle",
        }
    }

    fn tag(self) -> u8 {
        Method::ALL.iter().position(|&m| m == self).unwrap() as u8
    }

    fn from_tag(t: u8) -> Option<Method> {
        Method::ALL.get(t as usize).copied()
    }
}

/// Method plus parameters. Fields a method does not use are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReducerSpec {
    pub method: Method,
    pub target_dim: usize,
    pub seed: u64,
    /// t-SNE.
    pub perplexity: f64,
    /// UMAP, Isomap and LLE neighborhood size.
    pub n_neighbors: Option<usize>,
    /// UMAP.
    pub min_dist: f64,
    /// t-SNE and UMAP step size; method default when unset.
    pub learning_rate: Option<f64>,
    /// t-SNE iterations, UMAP epochs or SMACOF iteration cap; method default when unset.
    pub iterations: Option<usize>,
    /// Neighbors used by the barycentric out-of-sample extension.
    pub oos_neighbors: usize,
    /// Isomap handling of a disconnected neighbor graph.
    pub disconnected: DisconnectedPolicy,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisconnectedPolicy {
    /// Embed the largest component; place the other points barycentrically.
    #[default]
    Largest,
    /// Join every pair of components by their closest pair of points.
    Bridge,
}

impl Default for ReducerSpec {
    fn default() -> Self {
        ReducerSpec {
            method: Method::Pca,
            target_dim: 16,
            seed: 0,
            perplexity: 30.0,
            n_neighbors: None,
            min_dist: 0.1,
            learning_rate: None,
            iterations: None,
            oos_neighbors: 5,
            disconnected: DisconnectedPolicy::Largest,
        }
    }
}

impl ReducerSpec {
    pub fn new(method: Method, target_dim: usize) -> Self {
        ReducerSpec {
            method,
            target_dim,
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn neighbors(&self) -> usize {
        self.n_neighbors.unwrap_or(match self.method {
            Method::Umap => 15,
            _ => 12,
        })
    }
}

/// Per-fit reporting: whatever the method naturally exposes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explained_variance_ratio: Option<Vec<f64>>,
    /// (iteration, KL) pairs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kl_history: Vec<(usize, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_kl: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stress_history: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_stress: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub umap_ab: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_neighbors_used: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MethodState {
    Pca {
        mean: Vec<f64>,
        /// D×d, column `i` is the `i`-th principal axis.
        components: Matrix,
        eigenvalues: Vec<f64>,
    },
    /// Embedding-only methods; out-of-sample points go through the barycentric map.
    Barycentric,
    /// Fitted from a distance matrix: no input space to map new points from.
    Precomputed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FittedReducer {
    pub spec: ReducerSpec,
    pub train_x: Matrix,
    pub embedding: Matrix,
    pub state: MethodState,
    pub diagnostics: Diagnostics,
}

impl FittedReducer {
    pub fn to_bytes(&self) -> Vec<u8> {
        serial::encode(self)
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, ReductionError> {
        serial::decode(b)
    }
}

pub(crate) fn check_input(x: &Matrix, spec: &ReducerSpec, min_points: usize) -> Result<(), ReductionError> {
    if x.rows() < min_points {
        return Err(ReductionError::TooFewPoints {
            need: min_points,
            got: x.rows(),
        });
    }
    if spec.target_dim == 0 || spec.target_dim > x.cols() {
        return Err(ReductionError::InvalidDim {
            d: spec.target_dim,
            input: x.cols(),
        });
    }
    if spec.target_dim >= x.rows() {
        return Err(ReductionError::InvalidDim {
            d: spec.target_dim,
            input: x.cols(),
        });
    }
    Ok(())
}

/// Fits the reducer named by `spec.method`.
pub fn fit(x: &Matrix, spec: &ReducerSpec) -> Result<FittedReducer, ReductionError> {
    match spec.method {
        Method::Pca => pca_fit(x, spec.target_dim).map(|mut r| {
            r.spec = spec.clone();
            r
        }),
        Method::Tsne => tsne_embed(x, spec),
        Method::Umap => umap_fit(x, spec),
        Method::Isomap => isomap_fit(x, spec),
        Method::Mds => mds_embed(x, spec),
        Method::Lle => lle_fit(x, spec),
    }
}

/// Maps new rows into the fitted space: exact projection for PCA, barycentric
/// extension over the `oos_neighbors` nearest training rows otherwise.
pub fn transform(r: &FittedReducer, x_new: &Matrix) -> Result<Matrix, ReductionError> {
    if x_new.cols() != r.train_x.cols() {
        return Err(ReductionError::DimensionMismatch {
            expected: r.train_x.cols(),
            got: x_new.cols(),
        });
    }
    match &r.state {
        MethodState::Pca { mean, components, .. } => Ok(pca::project(x_new, mean, components)),
        MethodState::Barycentric => Ok(barycentric(&r.train_x, &r.embedding, x_new, r.spec.oos_neighbors.max(1))),
        MethodState::Precomputed => Err(ReductionError::Unsupported(
            "reducer was fitted on a distance matrix and cannot map new points".into(),
        )),
    }
}

/// Inverse-distance weighted average of the embeddings of the `k` nearest
/// reference rows; an exact match returns that row's embedding.
pub fn barycentric(reference: &Matrix, embedding: &Matrix, x_new: &Matrix, k: usize) -> Matrix {
    let d = embedding.cols();
    let k = k.min(reference.rows());
    let mut out = Matrix::zeros(x_new.rows(), d);
    for i in 0..x_new.rows() {
        let (idx, dist) = nearest(reference, x_new.row(i), k, Metric::Euclidean, None);
        let row = out.row_mut(i);
        if dist[0] == 0.0 {
            row.copy_from_slice(embedding.row(idx[0]));
            continue;
        }
        let w: Vec<f64> = dist.iter().map(|d| 1.0 / d).collect();
        let total: f64 = w.iter().sum();
        for (&j, &wj) in idx.iter().zip(&w) {
            for (o, &e) in row.iter_mut().zip(embedding.row(j)) {
                *o += wj / total * e;
            }
        }
    }
    out
}

/// Principal-component scores scaled so the first column has standard
/// deviation `std`; the shared starting point of t-SNE and UMAP.
pub(crate) fn scaled_pca_init(x: &Matrix, d: usize, std: f64) -> Result<Matrix, ReductionError> {
    let p = pca_fit(x, d)?;
    let mut y = p.embedding;
    let first = y.column(0);
    let n = first.len() as f64;
    let mean = first.iter().sum::<f64>() / n;
    let sd = (first.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let s = if sd > 0.0 { std / sd } else { 1.0 };
    for v in y.as_mut_slice() {
        *v *= s;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barycentric_exact_and_midpoint() {
        let train = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [5.0, 5.0]]).unwrap();
        let emb = Matrix::from_rows(&[[0.0], [2.0], [9.0]]).unwrap();
        let q = Matrix::from_rows(&[[1.0, 0.0], [0.5, 0.0]]).unwrap();
        let out = barycentric(&train, &emb, &q, 2);
        assert_eq!(out.row(0), &[2.0]);
        assert!((out[(1, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spec_json_defaults() {
        let s: ReducerSpec = serde_json::from_str(r#"{"method":"umap","target_dim":2}"#).unwrap();
        assert_eq!(s.neighbors(), 15);
        assert_eq!(s.min_dist, 0.1);
        assert!(serde_json::from_str::<ReducerSpec>(r#"{"method":"umap","bogus":1}"#).is_err());
    }
}
