//! Dense linear algebra and neighbor-graph kernels used by every later stage.

mod eig;
mod graph;
mod matrix;

pub use eig::{sym_eig, SymEigResult, SYMMETRY_TOL};
pub use graph::{geodesic_distances, knn_graph, nearest, Metric, NeighborGraph};
pub(crate) use graph::shortest_paths;
pub use matrix::{euclidean, pairwise_distances, squared_euclidean, Matrix};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("expected {expected:?} matrix, got {len} values")]
    ShapeMismatch { expected: (usize, usize), len: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("incompatible shapes {left:?} and {right:?}")]
    DimensionMismatch { left: (usize, usize), right: (usize, usize) },
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },
    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_diagonal:e})")]
    NoConvergence { sweeps: usize, off_diagonal: f64 },
    #[error("k = {k} must be smaller than the number of points ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("neighbor graph is disconnected, component sizes {component_sizes:?}")]
    Disconnected { component_sizes: Vec<usize> },
    #[error("singular linear system")]
    Singular,
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, NumericsError> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(NumericsError::DimensionMismatch {
            left: a.shape(),
            right: (b.len(), 1),
        });
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()).then(j.cmp(&i)))
            .unwrap_or(col);
        if m[(pivot, col)].abs() < 1e-300 {
            return Err(NumericsError::Singular);
        }
        if pivot != col {
            for j in 0..n {
                let t = m[(col, j)];
                m[(col, j)] = m[(pivot, j)];
                m[(pivot, j)] = t;
            }
            x.swap(col, pivot);
        }
        for i in (col + 1)..n {
            let f = m[(i, col)] / m[(col, col)];
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m[(i, j)] -= f * m[(col, j)];
            }
            x[i] -= f * x[col];
        }
    }
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|j| m[(i, j)] * x[j]).sum();
        x[i] = (x[i] - s) / m[(i, i)];
    }
    Ok(x)
}
