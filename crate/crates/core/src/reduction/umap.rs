//! UMAP: fuzzy k-NN graph plus negative-sampling layout optimization.

use rand::Rng as _;

use super::{check_input, scaled_pca_init, Diagnostics, FittedReducer, MethodState, ReducerSpec, ReductionError};
use crate::numerics::{knn_graph, Matrix, Metric};
use crate::rng::SeedStream;

const DEFAULT_EPOCHS: usize = 200;
const DEFAULT_LEARNING_RATE: f64 = 1.0;
const NEGATIVE_SAMPLE_RATE: f64 = 5.0;
const GRAD_CLIP: f64 = 4.0;
const SPREAD: f64 = 1.0;
const BANDWIDTH_ITERS: usize = 64;
const BANDWIDTH_TOL: f64 = 1e-5;
const MIN_K_DIST_SCALE: f64 = 1e-3;

/// Symmetric fuzzy membership graph.
#[derive(Clone, Debug, PartialEq)]
pub struct FuzzyGraph {
    /// Sorted by neighbor index; `adjacency[i]` holds `(j, w_ij)`, w_ij = w_ji.
    pub adjacency: Vec<Vec<(usize, f64)>>,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl FuzzyGraph {
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[i]
            .binary_search_by_key(&j, |e| e.0)
            .map_or(0.0, |p| self.adjacency[i][p].1)
    }
}

/// Per-point ρ (nearest nonzero neighbor distance) and σ bisected so that
/// Σ_j exp(−max(0, d_ij − ρ_i)/σ_i) = log2(k); directed memberships are then
/// combined with the probabilistic union a + b − ab.
pub fn fuzzy_graph(x: &Matrix, k: usize) -> Result<FuzzyGraph, ReductionError> {
    let n = x.rows();
    if k >= n || k == 0 {
        return Err(ReductionError::NeighborsTooLarge { k, n });
    }
    let g = knn_graph(x, k, Metric::Euclidean)?;
    let target = (k as f64).log2();
    let global_mean = g.distances.iter().flatten().sum::<f64>() / (n * k) as f64;
    let mut rho = vec![0.0; n];
    let mut sigma = vec![1.0; n];
    for i in 0..n {
        let d = &g.distances[i];
        rho[i] = d.iter().copied().find(|&v| v > 0.0).unwrap_or(0.0);
        let (mut lo, mut hi, mut mid) = (0.0, f64::INFINITY, 1.0);
        for _ in 0..BANDWIDTH_ITERS {
            let psum: f64 = d.iter().map(|&v| (-(v - rho[i]).max(0.0) / mid).exp()).sum();
            if (psum - target).abs() < BANDWIDTH_TOL {
                break;
            }
            if psum > target {
                hi = mid;
                mid = 0.5 * (lo + hi);
            } else {
                lo = mid;
                mid = if hi.is_finite() { 0.5 * (lo + hi) } else { mid * 2.0 };
            }
        }
        let mean_i = d.iter().sum::<f64>() / k as f64;
        let floor = MIN_K_DIST_SCALE * if rho[i] > 0.0 { mean_i } else { global_mean };
        sigma[i] = mid.max(floor);
    }
    let mut directed: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        for (&j, &d) in g.indices[i].iter().zip(&g.distances[i]) {
            let w = (-(d - rho[i]).max(0.0) / sigma[i]).exp();
            directed[i].push((j, w));
        }
        directed[i].sort_by_key(|e| e.0);
    }
    let lookup = |i: usize, j: usize| {
        directed[i]
            .binary_search_by_key(&j, |e| e.0)
            .map_or(0.0, |p| directed[i][p].1)
    };
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        let mut nbrs: Vec<usize> = directed[i].iter().map(|e| e.0).collect();
        for j in 0..n {
            if directed[j].binary_search_by_key(&i, |e| e.0).is_ok() {
                nbrs.push(j);
            }
        }
        nbrs.sort_unstable();
        nbrs.dedup();
        for j in nbrs {
            let (a, b) = (lookup(i, j), lookup(j, i));
            adjacency[i].push((j, a + b - a * b));
        }
    }
    Ok(FuzzyGraph { adjacency, rho, sigma })
}

/// Least-squares (a, b) so that 1/(1 + a x^{2b}) tracks the target curve
/// that is 1 below `min_dist` and exp(−(x − min_dist)/spread) above it.
/// Levenberg–Marquardt from (1, 1) on 300 samples of [0, 3·spread].
pub fn fit_ab(min_dist: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|i| 3.0 * SPREAD * i as f64 / 299.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| if x < min_dist { 1.0 } else { (-(x - min_dist) / SPREAD).exp() })
        .collect();
    let sse = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let r = 1.0 / (1.0 + a * x.powf(2.0 * b)) - y;
                r * r
            })
            .sum()
    };
    let (mut a, mut b) = (1.0, 1.0);
    let mut lambda = 1e-3;
    let mut cost = sse(a, b);
    for _ in 0..500 {
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for (&x, &y) in xs.iter().zip(&ys) {
            if x == 0.0 {
                continue;
            }
            let u = x.powf(2.0 * b);
            let den = 1.0 + a * u;
            let r = 1.0 / den - y;
            let ja = -u / (den * den);
            let jb = -a * u * 2.0 * x.ln() / (den * den);
            jtj[0][0] += ja * ja;
            jtj[0][1] += ja * jb;
            jtj[1][1] += jb * jb;
            jtr[0] += ja * r;
            jtr[1] += jb * r;
        }
        jtj[1][0] = jtj[0][1];
        loop {
            let m00 = jtj[0][0] * (1.0 + lambda);
            let m11 = jtj[1][1] * (1.0 + lambda);
            let det = m00 * m11 - jtj[0][1] * jtj[1][0];
            let da = -(m11 * jtr[0] - jtj[0][1] * jtr[1]) / det;
            let db = -(m00 * jtr[1] - jtj[1][0] * jtr[0]) / det;
            let (na, nb) = (a + da, b + db);
            let nc = if na > 0.0 && nb > 0.0 { sse(na, nb) } else { f64::INFINITY };
            if nc < cost {
                let done = (cost - nc) <= 1e-15 * cost.max(1e-300);
                a = na;
                b = nb;
                cost = nc;
                lambda = (lambda * 0.1).max(1e-12);
                if done {
                    return (a, b);
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                return (a, b);
            }
        }
    }
    (a, b)
}

pub fn umap_fit(x: &Matrix, spec: &ReducerSpec) -> Result<FittedReducer, ReductionError> {
    check_input(x, spec, 3)?;
    let n = x.rows();
    let k = spec.neighbors();
    let graph = fuzzy_graph(x, k)?;
    let (a, b) = fit_ab(spec.min_dist);
    let epochs = spec.iterations.unwrap_or(DEFAULT_EPOCHS);
    let alpha0 = spec.learning_rate.unwrap_or(DEFAULT_LEARNING_RATE);

    let mut edges = Vec::new();
    for (i, list) in graph.adjacency.iter().enumerate() {
        for &(j, w) in list {
            edges.push((i, j, w));
        }
    }
    let wmax = edges.iter().map(|e| e.2).fold(0.0, f64::max);
    edges.retain(|e| e.2 >= wmax / epochs as f64);
    let eps: Vec<f64> = edges.iter().map(|e| wmax / e.2).collect();
    let eps_neg: Vec<f64> = eps.iter().map(|e| e / NEGATIVE_SAMPLE_RATE).collect();
    let mut next = eps.clone();
    let mut next_neg = eps_neg.clone();

    let mut y = scaled_pca_init(x, spec.target_dim, 1e-4)?;
    let d = y.cols();
    let mut rng = SeedStream::new(spec.seed).rng("umap-layout");
    let clip = |v: f64| v.clamp(-GRAD_CLIP, GRAD_CLIP);
    for epoch in 0..epochs {
        let alpha = alpha0 * (1.0 - epoch as f64 / epochs as f64);
        let e = epoch as f64;
        for (idx, &(i, j, _)) in edges.iter().enumerate() {
            if next[idx] > e {
                continue;
            }
            let d2: f64 = (0..d).map(|c| (y[(i, c)] - y[(j, c)]).powi(2)).sum();
            if d2 > 0.0 {
                let coeff = -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0);
                for c in 0..d {
                    let g = clip(coeff * (y[(i, c)] - y[(j, c)]));
                    y[(i, c)] += g * alpha;
                    y[(j, c)] -= g * alpha;
                }
            }
            next[idx] += eps[idx];
            let n_neg = ((e - next_neg[idx]) / eps_neg[idx]).floor().max(0.0) as usize;
            for _ in 0..n_neg {
                let t = rng.random_range(0..n);
                if t == i {
                    continue;
                }
                let d2: f64 = (0..d).map(|c| (y[(i, c)] - y[(t, c)]).powi(2)).sum();
                if d2 <= 0.0 {
                    continue;
                }
                let coeff = 2.0 * b / ((0.001 + d2) * (a * d2.powf(b) + 1.0));
                for c in 0..d {
                    let g = clip(coeff * (y[(i, c)] - y[(t, c)]));
                    y[(i, c)] += g * alpha;
                }
            }
            next_neg[idx] += n_neg as f64 * eps_neg[idx];
        }
    }
    Ok(FittedReducer {
        spec: spec.clone(),
        train_x: x.clone(),
        embedding: y,
        state: MethodState::Barycentric,
        diagnostics: Diagnostics {
            umap_ab: Some((a, b)),
            n_neighbors_used: Some(k),
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn memberships_symmetric_and_bounded() {
        let x = Matrix::from_fn(30, 3, |i, j| ((i * 13 + j * 5) % 17) as f64 / 4.0 + (i % 3) as f64 * 10.0);
        let g = fuzzy_graph(&x, 5).unwrap();
        for i in 0..30 {
            for &(j, w) in &g.adjacency[i] {
                assert!((0.0..=1.0).contains(&w));
                assert_eq!(w, g.weight(j, i));
            }
        }
    }

    #[test]
    fn neighbors_must_be_fewer_than_points() {
        let x = Matrix::zeros(4, 2);
        assert!(matches!(fuzzy_graph(&x, 4), Err(ReductionError::NeighborsTooLarge { .. })));
    }
}
