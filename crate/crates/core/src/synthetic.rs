//! Seeded synthetic datasets for tests, benchmarks and the dimension sweep.

use std::f64::consts::PI;

use rand::Rng as _;

use crate::numerics::Matrix;
use crate::rng::{standard_normal, SeedStream};

/// `k` isotropic unit-variance Gaussian clusters in `dim` dimensions whose
/// centers are pairwise `separation` apart (`separation / √2 · e_c`).
/// Labels cycle 0, 1, …, k−1.
pub fn gaussian_clusters(n: usize, dim: usize, k: usize, separation: f64, seed: u64) -> (Matrix, Vec<usize>) {
    assert!(k <= dim, "need one axis per cluster");
    let mut rng = SeedStream::new(seed).rng("clusters");
    let s = separation / 2f64.sqrt();
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let x = Matrix::from_fn(n, dim, |i, j| {
        let c = if j == labels[i] { s } else { 0.0 };
        c + standard_normal(&mut rng)
    });
    (x, labels)
}

/// Swiss roll: t ~ U[1.5π, 4.5π], height ~ U[0, 21], point (t cos t, h, t sin t).
/// Returns the points and t.
pub fn swiss_roll(n: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let mut rng = SeedStream::new(seed).rng("swiss-roll");
    let mut t = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * 3);
    for _ in 0..n {
        let ti = 1.5 * PI * (1.0 + 2.0 * rng.random::<f64>());
        let h = 21.0 * rng.random::<f64>();
        data.extend([ti * ti.cos(), h, ti * ti.sin()]);
        t.push(ti);
    }
    (Matrix::from_vec(n, 3, data).expect("finite"), t)
}

/// Isotropic standard Gaussian sample.
pub fn isotropic_gaussian(n: usize, dim: usize, seed: u64) -> Matrix {
    let mut rng = SeedStream::new(seed).rng("isotropic");
    Matrix::from_fn(n, dim, |_, _| standard_normal(&mut rng))
}

pub const SIGNAL_DIMS: usize = 10;
pub const NOISE_DIMS: usize = 50;
const SUBCLUSTERS: usize = 4;

/// Three classes, each a mixture of four sub-clusters whose centers are
/// drawn with standard deviation 3 in ten signal coordinates, plus fifty
/// unit-variance noise coordinates. Class information is spread over all
/// ten signal directions, so very low target dimensions lose it.
pub fn signal_in_noise(n: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let stream = SeedStream::new(seed);
    let mut crng = stream.rng("centers");
    let centers: Vec<Vec<f64>> = (0..3 * SUBCLUSTERS)
        .map(|_| (0..SIGNAL_DIMS).map(|_| 3.0 * standard_normal(&mut crng)).collect())
        .collect();
    let mut rng = stream.rng("points");
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let mut data = Vec::with_capacity(n * (SIGNAL_DIMS + NOISE_DIMS));
    for &y in &labels {
        let c = &centers[y * SUBCLUSTERS + rng.random_range(0..SUBCLUSTERS)];
        for &cj in c {
            data.push(cj + standard_normal(&mut rng));
        }
        for _ in 0..NOISE_DIMS {
            data.push(standard_normal(&mut rng));
        }
    }
    (Matrix::from_vec(n, SIGNAL_DIMS + NOISE_DIMS, data).expect("finite"), labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_determinism() {
        let (a, la) = gaussian_clusters(30, 5, 3, 10.0, 1);
        let (b, _) = gaussian_clusters(30, 5, 3, 10.0, 1);
        assert_eq!(a, b);
        assert_eq!(la[..4], [0, 1, 2, 0]);
        let (s, t) = swiss_roll(10, 2);
        assert_eq!(s.shape(), (10, 3));
        assert!(t.iter().all(|&v| (1.5 * PI..=4.5 * PI).contains(&v)));
        assert_eq!(signal_in_noise(12, 0).0.cols(), 60);
    }
}
