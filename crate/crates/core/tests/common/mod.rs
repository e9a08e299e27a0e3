//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use hyfacial::classify::{MlpGradients, MlpModel};
use hyfacial::numerics::{Matrix, NeighborGraph};
use hyfacial::reduction::kl_divergence;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Every other point sorted by (distance, index), first `k` kept.
pub fn exhaustive_knn(x: &Matrix, k: usize) -> Vec<Vec<(usize, f64)>> {
    (0..x.rows())
        .map(|i| {
            let mut all: Vec<(usize, f64)> =
                (0..x.rows()).filter(|&j| j != i).map(|j| (j, dist(x.row(i), x.row(j)))).collect();
            all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            all.truncate(k);
            all
        })
        .collect()
}

/// All-pairs shortest paths over the undirected version of `g`.
pub fn floyd_warshall(g: &NeighborGraph) -> Vec<Vec<f64>> {
    let n = g.indices.len();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for i in 0..n {
        d[i][i] = 0.0;
        for (&j, &w) in g.indices[i].iter().zip(&g.distances[i]) {
            d[i][j] = d[i][j].min(w);
            d[j][i] = d[j][i].min(w);
        }
    }
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][m] + d[m][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Lowest k-means objective over every assignment of rows to `k` non-empty clusters.
pub fn optimal_inertia(x: &Matrix, k: usize) -> f64 {
    let n = x.rows();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut used = vec![false; k];
        labels.iter().for_each(|&l| used[l] = true);
        if used.iter().all(|&u| u) {
            best = best.min(partition_inertia(x, &labels, k));
        }
        let mut pos = 0;
        while pos < n {
            labels[pos] += 1;
            if labels[pos] < k {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
        if pos == n {
            return best;
        }
    }
}

fn partition_inertia(x: &Matrix, labels: &[usize], k: usize) -> f64 {
    let d = x.cols();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(x.row(i)) {
            *s += v;
        }
    }
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            x.row(i)
                .iter()
                .zip(&sums[l])
                .map(|(v, s)| (v - s / counts[l] as f64).powi(2))
                .sum::<f64>()
        })
        .sum()
}

/// k nearest training rows by (distance, index), majority label, ties to the smaller label.
pub fn brute_force_votes(train_x: &Matrix, train_y: &[usize], query: &Matrix, k: usize) -> Vec<usize> {
    let classes = train_y.iter().max().map_or(1, |m| m + 1);
    (0..query.rows())
        .map(|q| {
            let mut all: Vec<(usize, f64)> =
                (0..train_x.rows()).map(|j| (j, dist(query.row(q), train_x.row(j)))).collect();
            all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let mut votes = vec![0usize; classes];
            for &(j, _) in &all[..k] {
                votes[train_y[j]] += 1;
            }
            let top = *votes.iter().max().unwrap();
            votes.iter().position(|&v| v == top).unwrap()
        })
        .collect()
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-7 {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Central-difference check of the t-SNE KL gradient; returns the worst relative error.
pub fn tsne_gradient_error(p: &Matrix, y: &Matrix, analytic: &Matrix, h: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..y.rows() {
        for j in 0..y.cols() {
            let mut plus = y.clone();
            plus[(i, j)] += h;
            let mut minus = y.clone();
            minus[(i, j)] -= h;
            let numeric = (kl_divergence(p, &plus) - kl_divergence(p, &minus)) / (2.0 * h);
            worst = worst.max(relative_error(analytic[(i, j)], numeric));
        }
    }
    worst
}

/// Central-difference check of every MLP weight and bias; returns the worst relative error.
pub fn mlp_gradient_error(
    model: &MlpModel,
    loss: impl Fn(&MlpModel) -> f64,
    analytic: &MlpGradients,
    h: f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for l in 0..model.weights.len() {
        let (r, c) = model.weights[l].shape();
        for i in 0..r {
            for j in 0..c {
                let mut plus = model.clone();
                plus.weights[l][(i, j)] += h;
                let mut minus = model.clone();
                minus.weights[l][(i, j)] -= h;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
                worst = worst.max(relative_error(analytic.weights[l][(i, j)], numeric));
            }
        }
        for i in 0..model.biases[l].len() {
            let mut plus = model.clone();
            plus.biases[l][i] += h;
            let mut minus = model.clone();
            minus.biases[l][i] -= h;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            worst = worst.max(relative_error(analytic.biases[l][i], numeric));
        }
    }
    worst
}

/// Sample variance (N−1 denominator) of each column.
pub fn column_variances(x: &Matrix) -> Vec<f64> {
    let n = x.rows() as f64;
    (0..x.cols())
        .map(|j| {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / n;
            col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
        })
        .collect()
}

/// Max |A v − λ v| over all eigenpairs.
pub fn eig_residual(a: &Matrix, values: &[f64], vectors: &Matrix) -> f64 {
    let n = a.rows();
    let mut worst: f64 = 0.0;
    for (k, &lambda) in values.iter().enumerate() {
        for i in 0..n {
            let av: f64 = (0..n).map(|j| a[(i, j)] * vectors[(j, k)]).sum();
            worst = worst.max((av - lambda * vectors[(i, k)]).abs());
        }
    }
    worst
}

/// Upper-triangle pairwise Euclidean distances of the rows.
pub fn pair_distances(x: &Matrix) -> Vec<f64> {
    let n = x.rows();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(dist(x.row(i), x.row(j)));
        }
    }
    out
}
