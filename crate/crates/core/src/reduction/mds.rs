//! Metric MDS by SMACOF, and classical (Torgerson) MDS.

use super::{pca_fit, Diagnostics, FittedReducer, MethodState, ReducerSpec, ReductionError};
use crate::numerics::{euclidean, pairwise_distances, sym_eig, Matrix};

const DEFAULT_ITERS: usize = 300;
const REL_TOL: f64 = 1e-6;

/// sqrt(Σ_{i<j} (‖y_i − y_j‖ − δ_ij)²).
pub fn stress(delta: &Matrix, y: &Matrix) -> f64 {
    let n = y.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let r = euclidean(y.row(i), y.row(j)) - delta[(i, j)];
            s += r * r;
        }
    }
    s.sqrt()
}

/// Top-`d` coordinates of B = −½ J D⁽²⁾ J, scaled by the square roots of the
/// (clamped non-negative) eigenvalues.
pub fn classical_mds(delta: &Matrix, d: usize) -> Result<Matrix, ReductionError> {
    let n = delta.rows();
    let mut sq = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            sq[(i, j)] = delta[(i, j)] * delta[(i, j)];
        }
    }
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).iter().sum::<f64>() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let mut b = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand);
        }
    }
    let e = sym_eig(&b)?;
    let mut y = Matrix::zeros(n, d);
    for c in 0..d.min(n) {
        let s = e.eigenvalues[c].max(0.0).sqrt();
        for i in 0..n {
            y[(i, c)] = e.eigenvectors[(i, c)] * s;
        }
    }
    Ok(y)
}

fn check_distances(delta: &Matrix) -> Result<(), ReductionError> {
    let n = delta.rows();
    match delta.asymmetry() {
        None => return Err(ReductionError::InvalidParameter("distance matrix must be square".into())),
        Some(a) if a > 1e-9 => {
            return Err(ReductionError::InvalidParameter(format!("distance matrix asymmetric by {a:e}")))
        }
        _ => {}
    }
    if (0..n).any(|i| delta[(i, i)] != 0.0) {
        return Err(ReductionError::InvalidParameter("distance matrix needs a zero diagonal".into()));
    }
    if delta.as_slice().iter().any(|&v| v < 0.0) {
        return Err(ReductionError::InvalidParameter("negative distance".into()));
    }
    Ok(())
}

/// SMACOF from `init`. Returns the configuration and the stress after every
/// accepted iteration; the sequence is non-increasing by construction since
/// a step that would raise stress ends the run.
fn smacof(delta: &Matrix, init: Matrix, max_iter: usize) -> (Matrix, Vec<f64>) {
    let n = delta.rows();
    let d = init.cols();
    let mut y = init;
    let mut history = vec![stress(delta, &y)];
    for _ in 0..max_iter {
        let old = *history.last().unwrap();
        if old == 0.0 {
            break;
        }
        let mut next = Matrix::zeros(n, d);
        for i in 0..n {
            let mut diag = 0.0;
            let mut acc = vec![0.0; d];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let dij = euclidean(y.row(i), y.row(j));
                let bij = if dij > 0.0 { -delta[(i, j)] / dij } else { 0.0 };
                diag -= bij;
                for (a, &v) in acc.iter_mut().zip(y.row(j)) {
                    *a += bij * v;
                }
            }
            for ((o, &a), &v) in next.row_mut(i).iter_mut().zip(&acc).zip(y.row(i)) {
                *o = (a + diag * v) / n as f64;
            }
        }
        let s = stress(delta, &next);
        if s > old {
            break;
        }
        y = next;
        history.push(s);
        if (old - s) / old < REL_TOL {
            break;
        }
    }
    (y, history)
}

/// SMACOF on the Euclidean distances of `x`, started from its PCA scores.
pub fn mds_embed(x: &Matrix, spec: &ReducerSpec) -> Result<FittedReducer, ReductionError> {
    super::check_input(x, spec, 3)?;
    let delta = pairwise_distances(x);
    let init = pca_fit(x, spec.target_dim)?.embedding;
    let (y, history) = smacof(&delta, init, spec.iterations.unwrap_or(DEFAULT_ITERS));
    Ok(FittedReducer {
        spec: spec.clone(),
        train_x: x.clone(),
        embedding: y,
        state: MethodState::Barycentric,
        diagnostics: Diagnostics {
            final_stress: history.last().copied(),
            stress_history: history,
            ..Default::default()
        },
    })
}

/// SMACOF on a precomputed distance matrix, started from classical MDS.
pub fn mds_embed_distances(delta: &Matrix, spec: &ReducerSpec) -> Result<FittedReducer, ReductionError> {
    check_distances(delta)?;
    let n = delta.rows();
    if spec.target_dim == 0 || spec.target_dim >= n {
        return Err(ReductionError::InvalidDim {
            d: spec.target_dim,
            input: n,
        });
    }
    let init = classical_mds(delta, spec.target_dim)?;
    let (y, history) = smacof(delta, init, spec.iterations.unwrap_or(DEFAULT_ITERS));
    Ok(FittedReducer {
        spec: spec.clone(),
        train_x: delta.clone(),
        embedding: y,
        state: MethodState::Precomputed,
        diagnostics: Diagnostics {
            final_stress: history.last().copied(),
            stress_history: history,
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::Method;

    #[test]
    fn equilateral_triangle() {
        let delta = Matrix::from_rows(&[[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]).unwrap();
        let r = mds_embed_distances(&delta, &ReducerSpec::new(Method::Mds, 2)).unwrap();
        let e = pairwise_distances(&r.embedding);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert!((e[(i, j)] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn realizable_configuration_has_zero_stress() {
        let pts = Matrix::from_rows(&[[0.0, 0.0], [3.0, 0.0], [0.0, 4.0], [1.0, 1.0], [-2.0, 0.5]]).unwrap();
        let delta = pairwise_distances(&pts);
        let r = mds_embed_distances(&delta, &ReducerSpec::new(Method::Mds, 2)).unwrap();
        assert!(r.diagnostics.final_stress.unwrap() < 1e-6);
    }

    #[test]
    fn rejects_bad_distance_matrix() {
        let delta = Matrix::from_rows(&[[0.0, 1.0], [2.0, 0.0]]).unwrap();
        assert!(mds_embed_distances(&delta, &ReducerSpec::new(Method::Mds, 1)).is_err());
    }
}
