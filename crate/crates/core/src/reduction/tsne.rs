//! Exact t-SNE: O(N²) per iteration, no tree approximation.

use super::{check_input, scaled_pca_init, Diagnostics, FittedReducer, MethodState, ReducerSpec, ReductionError};
use crate::numerics::{pairwise_distances, Matrix};

const EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERS: usize = 250;
const MOMENTUM_SWITCH: usize = 250;
const DEFAULT_ITERS: usize = 1000;
const DEFAULT_LEARNING_RATE: f64 = 200.0;
const LOG_EVERY: usize = 50;
const MIN_GAIN: f64 = 0.01;
const P_FLOOR: f64 = 1e-12;

/// Symmetrized joint probabilities p_ij = (p_{j|i} + p_{i|j}) / 2N, with each
/// conditional bandwidth binary-searched to the target perplexity.
pub fn joint_probabilities(x: &Matrix, perplexity: f64) -> Matrix {
    let n = x.rows();
    let d = pairwise_distances(x);
    let target = perplexity.ln();
    let mut cond = Matrix::zeros(n, n);
    for i in 0..n {
        let di: Vec<f64> = (0..n).map(|j| d[(i, j)] * d[(i, j)]).collect();
        let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
        let mut row = vec![0.0; n];
        for _ in 0..200 {
            // Subtract the smallest off-diagonal distance so exp() cannot underflow to all zeros.
            let dmin = (0..n).filter(|&j| j != i).map(|j| di[j]).fold(f64::INFINITY, f64::min);
            let mut sum = 0.0;
            for j in 0..n {
                row[j] = if j == i { 0.0 } else { (-(di[j] - dmin) * beta).exp() };
                sum += row[j];
            }
            let mut h = 0.0;
            for j in 0..n {
                if j != i {
                    row[j] /= sum;
                    if row[j] > 0.0 {
                        h -= row[j] * row[j].ln();
                    }
                }
            }
            let diff = h - target;
            if diff.abs() < 1e-10 {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        cond.row_mut(i).copy_from_slice(&row);
    }
    let mut p = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[(i, j)] = ((cond[(i, j)] + cond[(j, i)]) / (2.0 * n as f64)).max(P_FLOOR);
            }
        }
    }
    p
}

fn student_t(y: &Matrix) -> (Matrix, f64) {
    let n = y.rows();
    let mut w = Matrix::zeros(n, n);
    let mut z = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d2: f64 = y.row(i).iter().zip(y.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            let v = 1.0 / (1.0 + d2);
            w[(i, j)] = v;
            w[(j, i)] = v;
            z += 2.0 * v;
        }
    }
    (w, z)
}

/// KL(P‖Q) with Q the normalized Student-t kernel on `y`.
pub fn kl_divergence(p: &Matrix, y: &Matrix) -> f64 {
    let (w, z) = student_t(y);
    let n = y.rows();
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p[(i, j)];
            if i != j && pij > 0.0 {
                kl += pij * (pij / (w[(i, j)] / z).max(f64::MIN_POSITIVE)).ln();
            }
        }
    }
    kl
}

/// ∂KL/∂y_i = 4 Σ_j (p_ij − q_ij)(y_i − y_j)(1 + ‖y_i − y_j‖²)⁻¹, with P
/// scaled by `exaggeration`.
pub fn kl_gradient(p: &Matrix, y: &Matrix, exaggeration: f64) -> Matrix {
    let (n, d) = y.shape();
    let (w, z) = student_t(y);
    let mut g = Matrix::zeros(n, d);
    for i in 0..n {
        let yi = y.row(i).to_vec();
        let gi = g.row_mut(i);
        for j in 0..n {
            if i == j {
                continue;
            }
            let wij = w[(i, j)];
            let coeff = 4.0 * (exaggeration * p[(i, j)] - wij / z) * wij;
            for ((gk, &a), &b) in gi.iter_mut().zip(&yi).zip(y.row(j)) {
                *gk += coeff * (a - b);
            }
        }
    }
    g
}

pub fn tsne_embed(x: &Matrix, spec: &ReducerSpec) -> Result<FittedReducer, ReductionError> {
    check_input(x, spec, 4)?;
    let n = x.rows();
    let max = (n as f64 - 1.0) / 3.0;
    if !(spec.perplexity > 0.0) || spec.perplexity >= max {
        return Err(ReductionError::PerplexityTooLarge {
            perplexity: spec.perplexity,
            max,
        });
    }
    let iters = spec.iterations.unwrap_or(DEFAULT_ITERS);
    let lr = spec.learning_rate.unwrap_or(DEFAULT_LEARNING_RATE);
    let p = joint_probabilities(x, spec.perplexity);
    let mut y = scaled_pca_init(x, spec.target_dim, 1e-4)?;
    let (_, d) = y.shape();
    let mut update = Matrix::zeros(n, d);
    let mut gains = Matrix::from_raw(n, d, vec![1.0; n * d]);
    let mut history = vec![(0, kl_divergence(&p, &y))];
    for it in 0..iters {
        let exag = if it < EXAGGERATION_ITERS { EXAGGERATION } else { 1.0 };
        let momentum = if it < MOMENTUM_SWITCH { 0.5 } else { 0.8 };
        let grad = kl_gradient(&p, &y, exag);
        for ((u, gn), (&gv, yv)) in update
            .as_mut_slice()
            .iter_mut()
            .zip(gains.as_mut_slice())
            .zip(grad.as_slice().iter().zip(y.as_mut_slice()))
        {
            // Delta-bar-delta gains: grow when the step keeps direction.
            *gn = if *u * gv < 0.0 { *gn + 0.2 } else { (*gn * 0.8).max(MIN_GAIN) };
            *u = momentum * *u - lr * *gn * gv;
            *yv += *u;
        }
        let means = y.column_means();
        for r in 0..n {
            for (v, m) in y.row_mut(r).iter_mut().zip(&means) {
                *v -= m;
            }
        }
        if (it + 1) % LOG_EVERY == 0 || it + 1 == iters {
            history.push((it + 1, kl_divergence(&p, &y)));
        }
    }
    let final_kl = history.last().map(|h| h.1);
    Ok(FittedReducer {
        spec: spec.clone(),
        train_x: x.clone(),
        embedding: y,
        state: MethodState::Barycentric,
        diagnostics: Diagnostics {
            kl_history: history,
            final_kl,
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conditional_rows_hit_perplexity() {
        let x = Matrix::from_fn(20, 3, |i, j| ((i * 7 + j * 3) % 11) as f64 * 0.3);
        let p = joint_probabilities(&x, 5.0);
        let total: f64 = p.as_slice().iter().sum();
        assert!((total - 1.0).abs() < 1e-6);
        assert!(p.asymmetry().unwrap() < 1e-15);
    }

    #[test]
    fn kl_zero_when_p_equals_q() {
        let y = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]]).unwrap();
        let (w, z) = student_t(&y);
        let mut q = w.clone();
        for v in q.as_mut_slice() {
            *v /= z;
        }
        assert!(kl_divergence(&q, &y).abs() < 1e-15);
    }
}
