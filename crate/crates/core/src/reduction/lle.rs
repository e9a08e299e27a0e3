use super::{check_input, Diagnostics, FittedReducer, MethodState, ReducerSpec, ReductionError};
use crate::numerics::{knn_graph, solve, sym_eig, Matrix, Metric};

const REGULARIZATION: f64 = 1e-3;

/// Reconstruction weights: `weights[i][m]` belongs to neighbor `neighbors[i][m]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LleWeights {
    pub neighbors: Vec<Vec<usize>>,
    pub weights: Vec<Vec<f64>>,
}

/// Solves (C + r·tr(C)·I) w = 1 on each local Gram matrix C and rescales w
/// to sum to one.
pub fn lle_weights(x: &Matrix, k: usize) -> Result<LleWeights, ReductionError> {
    let g = knn_graph(x, k, Metric::Euclidean)?;
    let mut weights = Vec::with_capacity(x.rows());
    for i in 0..x.rows() {
        let nb = &g.indices[i];
        let z: Vec<Vec<f64>> = nb
            .iter()
            .map(|&j| x.row(j).iter().zip(x.row(i)).map(|(a, b)| a - b).collect())
            .collect();
        let mut c = Matrix::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                let v: f64 = z[a].iter().zip(&z[b]).map(|(p, q)| p * q).sum();
                c[(a, b)] = v;
                c[(b, a)] = v;
            }
        }
        let trace: f64 = (0..k).map(|a| c[(a, a)]).sum();
        let reg = if trace > 0.0 { REGULARIZATION * trace } else { REGULARIZATION };
        for a in 0..k {
            c[(a, a)] += reg;
        }
        let w = solve(&c, &vec![1.0; k])?;
        let s: f64 = w.iter().sum();
        weights.push(w.into_iter().map(|v| v / s).collect());
    }
    Ok(LleWeights {
        neighbors: g.indices,
        weights,
    })
}

/// M = (I − W)ᵀ(I − W) as a dense matrix.
pub(crate) fn embedding_cost_matrix(w: &LleWeights, n: usize) -> Matrix {
    let mut iw = Matrix::identity(n);
    for (i, (nb, ws)) in w.neighbors.iter().zip(&w.weights).enumerate() {
        for (&j, &v) in nb.iter().zip(ws) {
            iw[(i, j)] -= v;
        }
    }
    let mut m = Matrix::zeros(n, n);
    for r in 0..n {
        let row = iw.row(r);
        let nz: Vec<(usize, f64)> = row.iter().copied().enumerate().filter(|e| e.1 != 0.0).collect();
        for &(a, va) in &nz {
            for &(b, vb) in &nz {
                m[(a, b)] += va * vb;
            }
        }
    }
    m
}

/// Bottom `d + 1` eigenvectors of M, dropping the lowest (constant) one.
///
/// With fewer than `d + 1` neighbors the local systems cannot span `d`
/// dimensions, so the neighborhood is widened and a warning recorded.
pub fn lle_fit(x: &Matrix, spec: &ReducerSpec) -> Result<FittedReducer, ReductionError> {
    check_input(x, spec, 3)?;
    let n = x.rows();
    let d = spec.target_dim;
    let mut diagnostics = Diagnostics::default();
    let mut k = spec.neighbors();
    if k < d + 1 {
        diagnostics
            .warnings
            .push(format!("lle: n_neighbors {k} < d+1; using {}", d + 1));
        k = d + 1;
    }
    if k >= n {
        return Err(ReductionError::NeighborsTooLarge { k, n });
    }
    diagnostics.n_neighbors_used = Some(k);
    let w = lle_weights(x, k)?;
    let m = embedding_cost_matrix(&w, n);
    let e = sym_eig(&m)?;
    let mut y = Matrix::zeros(n, d);
    for c in 0..d {
        let col = n - 2 - c;
        for i in 0..n {
            y[(i, c)] = e.eigenvectors[(i, col)];
        }
    }
    Ok(FittedReducer {
        spec: spec.clone(),
        train_x: x.clone(),
        embedding: y,
        state: MethodState::Barycentric,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_middle_point_splits_evenly() {
        let x = Matrix::from_rows(&[[-1.0], [0.0], [1.0]]).unwrap();
        let w = lle_weights(&x, 2).unwrap();
        let mut pairs: Vec<(usize, f64)> = w.neighbors[1].iter().copied().zip(w.weights[1].iter().copied()).collect();
        pairs.sort_by_key(|p| p.0);
        assert!((pairs[0].1 - 0.5).abs() < 1e-12);
        assert!((pairs[1].1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rows_sum_to_one_and_constant_is_null() {
        let x = Matrix::from_fn(25, 3, |i, j| (((i + 1) * (j + 2) * 7919) % 101) as f64 / 10.0);
        let w = lle_weights(&x, 6).unwrap();
        for row in &w.weights {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let m = embedding_cost_matrix(&w, 25);
        let e = sym_eig(&m).unwrap();
        assert!(e.eigenvalues[24].abs() < 1e-9);
        let v = e.vector(24);
        let c = 1.0 / 5.0;
        for vi in v {
            assert!((vi - c).abs() < 1e-6);
        }
    }
}
