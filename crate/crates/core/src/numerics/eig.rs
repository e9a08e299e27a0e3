//! Cyclic Jacobi eigensolver for dense symmetric matrices.

use super::{Matrix, NumericsError};

/// Asymmetry tolerated by [`sym_eig`], absolute.
pub const SYMMETRY_TOL: f64 = 1e-9;
const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct SymEigResult {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the unit eigenvector for `eigenvalues[i]`.
    pub eigenvectors: Matrix,
    pub sweeps: usize,
}

impl SymEigResult {
    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.eigenvectors.column(i)
    }
}

/// Eigendecomposition of a symmetric matrix.
///
/// Each eigenvector is signed so that its largest-magnitude component is
/// positive (first such component on ties), which makes the output
/// deterministic for a given input.
pub fn sym_eig(a: &Matrix) -> Result<SymEigResult, NumericsError> {
    let n = a.rows();
    match a.asymmetry() {
        None => {
            return Err(NumericsError::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            })
        }
        Some(asym) if asym > SYMMETRY_TOL => return Err(NumericsError::NonSymmetric { asymmetry: asym }),
        _ => {}
    }

    // Work on an exactly symmetric copy.
    let mut w = a.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (w[(i, j)] + w[(j, i)]);
            w[(i, j)] = m;
            w[(j, i)] = m;
        }
    }
    // Rows of `vt` are eigenvectors; keeps rotation updates contiguous.
    let mut vt = Matrix::identity(n);
    let scale = w.norm_frobenius();
    let mut sweeps = 0;

    if n > 1 && scale > 0.0 {
        loop {
            let off = off_diagonal_norm(&w);
            if off <= OFF_DIAGONAL_TOL * scale {
                break;
            }
            if sweeps == MAX_SWEEPS {
                return Err(NumericsError::NoConvergence {
                    sweeps,
                    off_diagonal: off,
                });
            }
            sweeps += 1;
            for p in 0..n - 1 {
                for q in (p + 1)..n {
                    let apq = w[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = w[(p, p)];
                    let aqq = w[(q, q)];
                    let g = 100.0 * apq.abs();
                    if sweeps > 4 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                        w[(p, q)] = 0.0;
                        w[(q, p)] = 0.0;
                        continue;
                    }
                    rotate(&mut w, &mut vt, p, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[(j, j)].total_cmp(&w[(i, i)]).then(i.cmp(&j)));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| w[(i, i)]).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let v = vt.row(src);
        let sign = canonical_sign(v);
        for (row, &x) in v.iter().enumerate() {
            eigenvectors[(row, col)] = sign * x;
        }
    }
    Ok(SymEigResult {
        eigenvalues,
        eigenvectors,
        sweeps,
    })
}

fn off_diagonal_norm(w: &Matrix) -> f64 {
    let n = w.rows();
    let mut s = 0.0;
    for i in 0..n {
        let r = w.row(i);
        for (j, v) in r.iter().enumerate() {
            if i != j {
                s += v * v;
            }
        }
    }
    s.sqrt()
}

fn rotate(w: &mut Matrix, vt: &mut Matrix, p: usize, q: usize) {
    let n = w.rows();
    let apq = w[(p, q)];
    let app = w[(p, p)];
    let aqq = w[(q, q)];
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = w[(k, p)];
        let akq = w[(k, q)];
        let np = c * akp - s * akq;
        let nq = s * akp + c * akq;
        w[(k, p)] = np;
        w[(p, k)] = np;
        w[(k, q)] = nq;
        w[(q, k)] = nq;
    }
    w[(p, p)] = app - t * apq;
    w[(q, q)] = aqq + t * apq;
    w[(p, q)] = 0.0;
    w[(q, p)] = 0.0;

    let cols = vt.cols();
    let data = vt.as_mut_slice();
    let (lo, hi) = data.split_at_mut(q * cols);
    let vp = &mut lo[p * cols..(p + 1) * cols];
    let vq = &mut hi[..cols];
    for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

fn canonical_sign(v: &[f64]) -> f64 {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let lead = v
        .iter()
        .find(|x| x.abs() >= max * (1.0 - 1e-12))
        .copied()
        .unwrap_or(1.0);
    if lead < 0.0 {
        -1.0
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;
    use rand::Rng;

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        let mut rng = SeedStream::new(seed).rng("sym");
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.random_range(-1.0..1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }

    fn max_residual(a: &Matrix, r: &SymEigResult) -> f64 {
        let n = a.rows();
        let mut worst = 0.0f64;
        for k in 0..n {
            let v = r.vector(k);
            for i in 0..n {
                let av: f64 = (0..n).map(|j| a[(i, j)] * v[j]).sum();
                worst = worst.max((av - r.eigenvalues[k] * v[i]).abs());
            }
        }
        worst
    }

    #[test]
    fn identity_has_unit_eigenvalues() {
        let r = sym_eig(&Matrix::identity(2)).unwrap();
        assert_eq!(r.eigenvalues, vec![1.0, 1.0]);
        let vtv = r.eigenvectors.transpose().matmul(&r.eigenvectors).unwrap();
        assert_eq!(vtv, Matrix::identity(2));
    }

    #[test]
    fn diagonal_gives_axes() {
        let a = Matrix::from_rows(&[[1.0, 0.0], [0.0, 3.0]]).unwrap();
        let r = sym_eig(&a).unwrap();
        assert_eq!(r.eigenvalues, vec![3.0, 1.0]);
        assert_eq!(r.vector(0), vec![0.0, 1.0]);
        assert_eq!(r.vector(1), vec![1.0, 0.0]);
    }

    #[test]
    fn random_5x5_residual() {
        let a = random_symmetric(5, 7);
        let r = sym_eig(&a).unwrap();
        assert!(max_residual(&a, &r) < 1e-8 * a.norm_inf());
        assert!(r.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_nonsymmetric() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eig(&a), Err(NumericsError::NonSymmetric { .. })));
    }

    #[test]
    fn sign_convention() {
        let a = random_symmetric(6, 1);
        let r = sym_eig(&a).unwrap();
        for k in 0..6 {
            let v = r.vector(k);
            let lead = v.iter().copied().max_by(|x, y| x.abs().total_cmp(&y.abs())).unwrap();
            assert!(lead > 0.0);
        }
    }
}
