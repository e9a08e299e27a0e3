//! K-means, class prototypes, and fixed-size pooling of descriptor sets.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptors::DescriptorSet;
use crate::numerics::{squared_euclidean, Matrix};
use crate::rng::SeedStream;

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_N_INIT: usize = 10;
const PAR_THRESHOLD: usize = 2048;
/// Upper bound on the subsets tried by the exhaustive seeding pass.
const MAX_EXHAUSTIVE_SEEDINGS: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("k = {k} exceeds the number of points ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("class {0} has no samples")]
    EmptyClass(usize),
    #[error("{what}: expected {expected}, got {got}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Centroids {
    pub k: usize,
    pub vectors: Matrix,
    pub inertia: f64,
    /// Cluster index per input row.
    pub assignments: Vec<usize>,
    /// Inertia after every update of the returned run, starting from the seeding.
    pub history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iter: usize,
    /// Independent k-means++ restarts; the lowest inertia wins.
    pub n_init: usize,
}

pub fn kmeans_fit(points: &Matrix, k: usize, max_iter: usize, seed: u64) -> Result<Centroids, SelectionError> {
    kmeans_fit_with(
        points,
        &KMeansParams {
            k,
            max_iter,
            n_init: DEFAULT_N_INIT,
        },
        seed,
    )
}

pub fn kmeans_fit_with(points: &Matrix, params: &KMeansParams, seed: u64) -> Result<Centroids, SelectionError> {
    let n = points.rows();
    let k = params.k;
    if k == 0 || params.max_iter == 0 || params.n_init == 0 {
        return Err(SelectionError::InvalidParameter(format!(
            "k={k}, max_iter={}, n_init={}",
            params.max_iter, params.n_init
        )));
    }
    if k > n {
        return Err(SelectionError::KTooLarge { k, n });
    }
    let stream = SeedStream::new(seed).child("kmeans");
    let mut best: Option<Centroids> = None;
    let mut keep = |c: Centroids| {
        if best.as_ref().is_none_or(|b| c.inertia < b.inertia) {
            best = Some(c);
        }
    };
    for run in 0..params.n_init {
        let centers = plusplus(points, k, stream.indexed(run as u64));
        keep(lloyd(points, centers, params.max_iter));
    }
    // Small inputs also try every seeding k-means++ could draw, which rules
    // out the local optima a handful of random restarts can miss.
    if binomial(n, k) <= MAX_EXHAUSTIVE_SEEDINGS {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            keep(lloyd(points, points.select_rows(&idx), params.max_iter));
            if !next_combination(&mut idx, n) {
                break;
            }
        }
    }
    Ok(best.unwrap())
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut c: usize = 1;
    for i in 0..k {
        c = match c.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return usize::MAX,
        };
    }
    c
}

/// Advances `idx` to the next increasing k-subset of 0..n in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
        return false;
    };
    idx[i] += 1;
    for j in i + 1..k {
        idx[j] = idx[j - 1] + 1;
    }
    true
}

fn plusplus(points: &Matrix, k: usize, stream: SeedStream) -> Matrix {
    let n = points.rows();
    let mut rng = stream.to_rng();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| squared_euclidean(points.row(i), points.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            // Guard against rounding landing on a zero-weight tail.
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&d| d > 0.0).unwrap();
            }
            pick
        } else {
            // All points coincide with a chosen center; take the first unchosen index.
            (0..n).find(|i| !chosen.contains(i)).unwrap()
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_euclidean(points.row(i), points.row(next)));
        }
    }
    points.select_rows(&chosen)
}

fn assign(points: &Matrix, centers: &Matrix) -> Vec<(usize, f64)> {
    let nearest = |i: usize| {
        let p = points.row(i);
        let mut best = (0, f64::INFINITY);
        for c in 0..centers.rows() {
            let d = squared_euclidean(p, centers.row(c));
            if d < best.1 {
                best = (c, d);
            }
        }
        best
    };
    if points.rows() >= PAR_THRESHOLD {
        (0..points.rows()).into_par_iter().map(nearest).collect()
    } else {
        (0..points.rows()).map(nearest).collect()
    }
}

fn inertia_of(points: &Matrix, centers: &Matrix, assignment: &[usize]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .map(|(i, &c)| squared_euclidean(points.row(i), centers.row(c)))
        .sum()
}

/// Means of assigned rows, accumulated in row order. Empty clusters take the
/// row farthest from its own center among clusters with more than one member.
fn update(points: &Matrix, centers: &Matrix, assignment: &mut [usize]) -> Matrix {
    let (k, d) = centers.shape();
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignment.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            break;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &a) in assignment.iter().enumerate() {
            if counts[a] > 1 {
                let dist = squared_euclidean(points.row(i), centers.row(a));
                if dist > far_d {
                    far_d = dist;
                    far = Some(i);
                }
            }
        }
        assignment[far.expect("k <= n leaves a cluster with two members")] = empty;
    }
    let mut sums = Matrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, &a) in assignment.iter().enumerate() {
        counts[a] += 1;
        for (s, &v) in sums.row_mut(a).iter_mut().zip(points.row(i)) {
            *s += v;
        }
    }
    for (c, &cnt) in counts.iter().enumerate() {
        for s in sums.row_mut(c) {
            *s /= cnt as f64;
        }
    }
    sums
}

/// Single-point transfers that strictly lower inertia (Hartigan's rule);
/// centers are updated incrementally. Returns whether anything moved.
fn hartigan_pass(points: &Matrix, centers: &mut Matrix, assignment: &mut [usize]) -> bool {
    let k = centers.rows();
    let mut counts = vec![0usize; k];
    for &a in assignment.iter() {
        counts[a] += 1;
    }
    let mut moved = false;
    for i in 0..points.rows() {
        let from = assignment[i];
        if counts[from] <= 1 {
            continue;
        }
        let p = points.row(i);
        let nf = counts[from] as f64;
        let cost_out = nf / (nf - 1.0) * squared_euclidean(p, centers.row(from));
        let mut best = (from, cost_out);
        for to in 0..k {
            if to == from {
                continue;
            }
            let nt = counts[to] as f64;
            let cost_in = nt / (nt + 1.0) * squared_euclidean(p, centers.row(to));
            if cost_in < best.1 * (1.0 - 1e-12) {
                best = (to, cost_in);
            }
        }
        let to = best.0;
        if to != from {
            let nt = counts[to] as f64;
            for (c, &v) in centers.row_mut(from).iter_mut().zip(p) {
                *c = (*c * nf - v) / (nf - 1.0);
            }
            for (c, &v) in centers.row_mut(to).iter_mut().zip(p) {
                *c = (*c * nt + v) / (nt + 1.0);
            }
            counts[from] -= 1;
            counts[to] += 1;
            assignment[i] = to;
            moved = true;
        }
    }
    moved
}

fn lloyd(points: &Matrix, mut centers: Matrix, max_iter: usize) -> Centroids {
    let k = centers.rows();
    let mut assignment: Vec<usize> = assign(points, &centers).into_iter().map(|(c, _)| c).collect();
    let mut history = vec![inertia_of(points, &centers, &assignment)];
    for _ in 0..max_iter {
        centers = update(points, &centers, &mut assignment);
        history.push(inertia_of(points, &centers, &assignment));
        let next: Vec<usize> = assign(points, &centers).into_iter().map(|(c, _)| c).collect();
        if next == assignment {
            // Lloyd is stuck; try single-point transfers before giving up.
            if !hartigan_pass(points, &mut centers, &mut assignment) {
                break;
            }
            // Recompute exact means so the history stays consistent.
            centers = update(points, &centers, &mut assignment);
            history.push(inertia_of(points, &centers, &assignment));
            assignment = assign(points, &centers).into_iter().map(|(c, _)| c).collect();
            continue;
        }
        assignment = next;
    }
    let inertia = inertia_of(points, &centers, &assignment);
    if inertia < *history.last().unwrap() {
        history.push(inertia);
    }
    Centroids {
        k,
        vectors: centers,
        inertia,
        assignments: assignment,
        history,
    }
}

/// Per-class mean rows. Row `i` of the result is the prototype of class `i`.
pub fn class_prototypes(features: &Matrix, labels: &[usize], num_classes: usize) -> Result<Centroids, SelectionError> {
    if labels.len() != features.rows() {
        return Err(SelectionError::LengthMismatch {
            what: "labels",
            expected: features.rows(),
            got: labels.len(),
        });
    }
    let d = features.cols();
    let mut sums = Matrix::zeros(num_classes, d);
    let mut counts = vec![0usize; num_classes];
    for (row, &y) in features.row_iter().zip(labels) {
        if y >= num_classes {
            return Err(SelectionError::InvalidParameter(format!("label {y} >= {num_classes} classes")));
        }
        counts[y] += 1;
        for (s, &v) in sums.row_mut(y).iter_mut().zip(row) {
            *s += v;
        }
    }
    for (c, &cnt) in counts.iter().enumerate() {
        if cnt == 0 {
            return Err(SelectionError::EmptyClass(c));
        }
        for s in sums.row_mut(c) {
            *s /= cnt as f64;
        }
    }
    let inertia = inertia_of(features, &sums, labels);
    Ok(Centroids {
        k: num_classes,
        vectors: sums,
        inertia,
        assignments: labels.to_vec(),
        history: vec![inertia],
    })
}

fn sort_rows(m: &Matrix) -> Matrix {
    let mut idx: Vec<usize> = (0..m.rows()).collect();
    idx.sort_by(|&a, &b| {
        m.row(a)
            .iter()
            .zip(m.row(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    m.select_rows(&idx)
}

/// Compresses a descriptor set into exactly `k` rows.
///
/// With at least `k` descriptors the rows are k-means centroids; with fewer,
/// the sorted descriptors are repeated as many whole times as fit and the
/// remainder is zero; an empty set gives zeros.
pub fn pool_descriptors(ds: &DescriptorSet, k: usize, seed: u64) -> Matrix {
    pool_rows(&ds.to_matrix(), k, seed)
}

pub fn pool_rows(rows: &Matrix, k: usize, seed: u64) -> Matrix {
    let (n, d) = rows.shape();
    if n == 0 || k == 0 {
        return Matrix::zeros(k, d);
    }
    if n > k {
        let c = kmeans_fit(rows, k, DEFAULT_MAX_ITER, seed).expect("k < n");
        return sort_rows(&c.vectors);
    }
    let sorted = sort_rows(rows);
    let reps = k / n;
    let mut out = Matrix::zeros(k, d);
    for r in 0..reps * n {
        out.row_mut(r).copy_from_slice(sorted.row(r % n));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[[f64; 2]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn combinations_cover_every_subset_once() {
        for (n, k) in [(5, 1), (6, 3), (12, 3), (4, 4)] {
            let mut idx: Vec<usize> = (0..k).collect();
            let mut seen = std::collections::BTreeSet::new();
            loop {
                assert!(idx.windows(2).all(|w| w[0] < w[1]) && idx[k - 1] < n);
                assert!(seen.insert(idx.clone()));
                if !next_combination(&mut idx, n) {
                    break;
                }
            }
            assert_eq!(seen.len(), binomial(n, k));
        }
        assert_eq!(binomial(200, 100), usize::MAX);
    }

    #[test]
    fn symmetric_four_points() {
        let c = kmeans_fit(&m(&[[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]]), 2, 100, 0).unwrap();
        let s = sort_rows(&c.vectors);
        assert_eq!(s.row(0), &[0.0, 0.5]);
        assert_eq!(s.row(1), &[10.0, 0.5]);
        assert!((c.inertia - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k_equals_n_recovers_points() {
        let x = m(&[[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]]);
        let c = kmeans_fit(&x, 3, 10, 5).unwrap();
        assert_eq!(c.inertia, 0.0);
        assert_eq!(sort_rows(&c.vectors), sort_rows(&x));
        assert!(matches!(kmeans_fit(&x, 4, 10, 5), Err(SelectionError::KTooLarge { k: 4, n: 3 })));
    }

    #[test]
    fn prototypes_are_means() {
        let x = m(&[[0.0, 0.0], [5.0, 5.0], [2.0, 2.0]]);
        let p = class_prototypes(&x, &[0, 1, 0], 2).unwrap();
        assert_eq!(p.vectors.row(0), &[1.0, 1.0]);
        assert_eq!(p.vectors.row(1), &[5.0, 5.0]);
        assert!(matches!(class_prototypes(&x, &[0, 0, 0], 2), Err(SelectionError::EmptyClass(1))));
    }

    #[test]
    fn pooling_shapes() {
        let empty = DescriptorSet::empty_real(3);
        assert_eq!(pool_descriptors(&empty, 4, 0), Matrix::zeros(4, 3));
        let x = m(&[[2.0, 0.0], [1.0, 0.0]]);
        let p = pool_rows(&x, 5, 0);
        assert_eq!(p.row(0), &[1.0, 0.0]);
        assert_eq!(p.row(1), &[2.0, 0.0]);
        assert_eq!(p.row(2), &[1.0, 0.0]);
        assert_eq!(p.row(3), &[2.0, 0.0]);
        assert_eq!(p.row(4), &[0.0, 0.0]);
        assert_eq!(pool_rows(&x, 2, 0), m(&[[1.0, 0.0], [2.0, 0.0]]));
    }
}
