mod common;

use common::*;
use hyfacial::classify::{knn_predict, rf_predict, rf_train, RfParams};
use hyfacial::numerics::{geodesic_distances, knn_graph, Metric};
use hyfacial::selection::{class_prototypes, kmeans_fit};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn knn_graph_matches_exhaustive_scan(n in 2usize..=200, dim in 1usize..6, k in 1usize..12, seed in any::<u64>()) {
        let k = k.min(n - 1);
        let x = random_matrix(n, dim, seed);
        let g = knn_graph(&x, k, Metric::Euclidean).unwrap();
        let oracle = exhaustive_knn(&x, k);
        for i in 0..n {
            let idx: Vec<usize> = oracle[i].iter().map(|p| p.0).collect();
            prop_assert_eq!(&g.indices[i], &idx);
            for (a, b) in g.distances[i].iter().zip(&oracle[i]) {
                prop_assert!((a - b.1).abs() <= 1e-12 * b.1.max(1.0));
            }
        }
    }

    #[test]
    fn geodesics_match_floyd_warshall(n in 3usize..=50, k in 2usize..8, seed in any::<u64>()) {
        let k = k.min(n - 1);
        let x = random_matrix(n, 3, seed);
        let g = knn_graph(&x, k, Metric::Euclidean).unwrap();
        prop_assume!(g.components().len() == 1);
        let d = geodesic_distances(&g).unwrap();
        let oracle = floyd_warshall(&g);
        for i in 0..n {
            for j in 0..n {
                prop_assert!((d[(i, j)] - oracle[i][j]).abs() <= 1e-12 * oracle[i][j].max(1.0));
            }
        }
    }

    #[test]
    fn kmeans_reaches_enumerated_optimum(n in 3usize..=10, k in 1usize..=3, seed in any::<u64>()) {
        let x = random_matrix(n, 2, seed);
        let c = kmeans_fit(&x, k, 100, seed).unwrap();
        let best = optimal_inertia(&x, k);
        prop_assert!(c.inertia <= best * (1.0 + 1e-9) + 1e-12, "{} vs {}", c.inertia, best);
    }

    #[test]
    fn knn_predict_matches_brute_force(n in 5usize..80, k in 1usize..=5, classes in 2usize..5, seed in any::<u64>()) {
        let x = random_matrix(n, 3, seed);
        let y: Vec<usize> = (0..n).map(|i| (i * 7 + seed as usize) % classes).collect();
        let q = random_matrix(20, 3, seed.wrapping_add(1));
        prop_assert_eq!(knn_predict(&x, &y, &q, k).unwrap(), brute_force_votes(&x, &y, &q, k));
    }

    #[test]
    fn forest_prediction_is_the_vote_majority(seed in any::<u64>()) {
        let x = random_matrix(60, 4, seed);
        let y: Vec<usize> = (0..60).map(|i| usize::from(x[(i, 0)] + 0.3 * x[(i, 1)] > 0.0) + usize::from(x[(i, 2)] > 0.5)).collect();
        prop_assume!(y.iter().any(|&c| c != y[0]));
        let params = RfParams { n_trees: 15, ..Default::default() };
        let m = rf_train(&x, &y, &params, seed).unwrap();
        let q = random_matrix(30, 4, seed ^ 1);
        let pred = rf_predict(&m, &q).unwrap();
        for (i, &p) in pred.iter().enumerate() {
            let votes = m.votes(q.row(i));
            prop_assert_eq!(votes.iter().sum::<u64>(), 15);
            let tally: Vec<u64> = (0..votes.len())
                .map(|c| m.trees.iter().filter(|t| t.predict_row(q.row(i)) == c).count() as u64)
                .collect();
            prop_assert_eq!(&votes, &tally);
            let top = *votes.iter().max().unwrap();
            prop_assert_eq!(p, votes.iter().position(|&v| v == top).unwrap());
        }
    }
}

#[test]
fn prototypes_match_single_pass_means_on_fixture() {
    let ds = hyfacial::dataset::load_fer_csv(fixtures_dir().join("fer_tiny.csv")).unwrap();
    let x = hyfacial::numerics::Matrix::from_rows(
        &ds.images.iter().map(|im| im.pixels().to_vec()).collect::<Vec<_>>(),
    )
    .unwrap();
    let c = class_prototypes(&x, &ds.labels, 8).unwrap();
    assert_eq!(x.rows(), 200);
    for class in 0..8 {
        let rows: Vec<usize> = (0..x.rows()).filter(|&i| ds.labels[i] == class).collect();
        for j in 0..x.cols() {
            let mut mean = 0.0;
            for (t, &i) in rows.iter().enumerate() {
                mean += (x[(i, j)] - mean) / (t + 1) as f64;
            }
            assert!((c.vectors[(class, j)] - mean).abs() < 1e-12);
        }
    }
}
