use super::{Diagnostics, FittedReducer, Method, MethodState, ReducerSpec, ReductionError};
use crate::numerics::{sym_eig, Matrix};

/// Top-`d` principal axes of the sample covariance (N−1 denominator).
///
/// When there are fewer rows than columns the N×N Gram matrix is
/// diagonalized instead and its eigenvectors mapped back to input space;
/// axes beyond the data rank are completed orthonormally.
pub fn pca_fit(x: &Matrix, d: usize) -> Result<FittedReducer, ReductionError> {
    let (n, dim) = x.shape();
    if n < 2 {
        return Err(ReductionError::TooFewPoints { need: 2, got: n });
    }
    if d == 0 || d > dim {
        return Err(ReductionError::InvalidDim { d, input: dim });
    }
    let mean = x.column_means();
    let mut xc = x.clone();
    for r in 0..n {
        for (v, m) in xc.row_mut(r).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let total_var: f64 = xc.as_slice().iter().map(|v| v * v).sum::<f64>() / (n - 1) as f64;
    if total_var == 0.0 {
        return Err(ReductionError::DegenerateInput);
    }

    let (eigenvalues, components) = if dim <= n {
        let mut cov = xc.transpose().matmul(&xc)?;
        for v in cov.as_mut_slice() {
            *v /= (n - 1) as f64;
        }
        let e = sym_eig(&cov)?;
        (e.eigenvalues[..d].to_vec(), e.eigenvectors.leading_columns(d))
    } else {
        let mut gram = xc.matmul(&xc.transpose())?;
        for v in gram.as_mut_slice() {
            *v /= (n - 1) as f64;
        }
        let e = sym_eig(&gram)?;
        let tol = e.eigenvalues[0].abs() * 1e-12;
        let mut comps = Matrix::zeros(dim, d);
        let mut vals = Vec::with_capacity(d);
        let mut filled = 0;
        for i in 0..d.min(n) {
            let lambda = e.eigenvalues[i];
            if lambda <= tol {
                break;
            }
            let u = e.vector(i);
            let scale = 1.0 / ((n - 1) as f64 * lambda).sqrt();
            let mut v = vec![0.0; dim];
            for (r, &ur) in u.iter().enumerate() {
                for (vj, &xj) in v.iter_mut().zip(xc.row(r)) {
                    *vj += ur * xj;
                }
            }
            for vj in &mut v {
                *vj *= scale;
            }
            canonical_sign(&mut v);
            for (j, vj) in v.into_iter().enumerate() {
                comps[(j, i)] = vj;
            }
            vals.push(lambda);
            filled += 1;
        }
        complete_basis(&mut comps, filled);
        vals.resize(d, 0.0);
        (vals, comps)
    };
    let embedding = project(x, &mean, &components);
    let ratios = eigenvalues.iter().map(|l| l / total_var).collect();
    Ok(FittedReducer {
        spec: ReducerSpec::new(Method::Pca, d),
        train_x: x.clone(),
        embedding,
        state: MethodState::Pca {
            mean,
            components,
            eigenvalues,
        },
        diagnostics: Diagnostics {
            explained_variance_ratio: Some(ratios),
            ..Default::default()
        },
    })
}

pub(crate) fn project(x: &Matrix, mean: &[f64], components: &Matrix) -> Matrix {
    let (dim, d) = components.shape();
    let mut out = Matrix::zeros(x.rows(), d);
    let mut centered = vec![0.0; dim];
    for r in 0..x.rows() {
        for ((c, &v), &m) in centered.iter_mut().zip(x.row(r)).zip(mean) {
            *c = v - m;
        }
        let row = out.row_mut(r);
        for (j, &c) in centered.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (o, &w) in row.iter_mut().zip(components.row(j)) {
                *o += c * w;
            }
        }
    }
    out
}

/// Maps scores back to input space: `y · Vᵀ + mean`.
pub fn pca_inverse(r: &FittedReducer, y: &Matrix) -> Result<Matrix, ReductionError> {
    let MethodState::Pca { mean, components, .. } = &r.state else {
        return Err(ReductionError::Unsupported("inverse projection needs a PCA reducer".into()));
    };
    let mut out = y.matmul(&components.transpose())?;
    for r in 0..out.rows() {
        for (v, m) in out.row_mut(r).iter_mut().zip(mean) {
            *v += m;
        }
    }
    Ok(out)
}

fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&b| b < 0.0) {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Fills columns `filled..` with unit vectors orthogonal to all previous
/// columns, by Gram–Schmidt over the coordinate axes.
fn complete_basis(m: &mut Matrix, filled: usize) {
    let (dim, d) = m.shape();
    let mut col = filled;
    let mut axis = 0;
    while col < d && axis < dim {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        axis += 1;
        for _ in 0..2 {
            for c in 0..col {
                let dot: f64 = (0..dim).map(|j| v[j] * m[(j, c)]).sum();
                for (j, vj) in v.iter_mut().enumerate() {
                    *vj -= dot * m[(j, c)];
                }
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        for (j, vj) in v.into_iter().enumerate() {
            m[(j, col)] = vj / norm;
        }
        col += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_y_equals_x() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [-3.0, -3.0]]).unwrap();
        let r = pca_fit(&x, 2).unwrap();
        let MethodState::Pca { components, eigenvalues, .. } = &r.state else { unreachable!() };
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((components[(0, 0)].abs() - h).abs() < 1e-12);
        assert!((components[(1, 0)].abs() - h).abs() < 1e-12);
        assert!(eigenvalues[1].abs() < 1e-12);
    }

    #[test]
    fn gram_path_matches_covariance_path() {
        let x = Matrix::from_rows(&[[1.0, 0.0, 2.0, 3.0], [0.0, 1.0, -1.0, 0.5], [2.0, 2.0, 0.0, -1.0]]).unwrap();
        let wide = pca_fit(&x, 2).unwrap();
        let MethodState::Pca { eigenvalues, components, .. } = &wide.state else { unreachable!() };
        let mean = x.column_means();
        let mut xc = x.clone();
        for r in 0..3 {
            for (v, m) in xc.row_mut(r).iter_mut().zip(&mean) {
                *v -= m;
            }
        }
        let mut cov = xc.transpose().matmul(&xc).unwrap();
        for v in cov.as_mut_slice() {
            *v /= 2.0;
        }
        let e = sym_eig(&cov).unwrap();
        for i in 0..2 {
            assert!((eigenvalues[i] - e.eigenvalues[i]).abs() < 1e-10);
            let v = e.vector(i);
            for j in 0..4 {
                assert!((components[(j, i)] - v[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn full_rank_round_trip() {
        let x = Matrix::from_rows(&[[1.0, 2.0, 0.0], [3.0, -1.0, 1.0], [0.0, 0.5, 4.0], [2.0, 2.0, 2.0]]).unwrap();
        let r = pca_fit(&x, 3).unwrap();
        let back = pca_inverse(&r, &r.embedding).unwrap();
        for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn identical_rows_rejected() {
        let x = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert_eq!(pca_fit(&x, 1), Err(ReductionError::DegenerateInput));
    }
}
