mod common;

use common::*;
use hyfacial::dataset::{read_fer_csv, write_fer_csv, GrayImage, LabeledDataset, Split};
use hyfacial::fusion::{
    load_deep_features, write_deep_features, DeepFeatureTable, FusionModel, Source, SourceMatrices,
};
use hyfacial::numerics::Matrix;
use proptest::prelude::*;

fn sources(n: usize, dims: [usize; 3], seed: u64) -> SourceMatrices {
    let scaled = |m: Matrix, s: f64| Matrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] * s + j as f64);
    SourceMatrices {
        vgg: Some(scaled(random_matrix(n, dims[0], seed), 40.0)),
        sift: Some(scaled(random_matrix(n, dims[1], seed + 1), 0.01)),
        orb: Some(random_matrix(n, dims[2], seed + 2).into_vec().iter().map(|v| f64::from(*v > 0.0)).collect::<Vec<_>>())
            .map(|v| Matrix::from_vec(n, dims[2], v).unwrap()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn train_blocks_are_standardized(n in 4usize..40, a in 1usize..6, b in 1usize..6, c in 1usize..6, seed in any::<u64>()) {
        let s = sources(n, [a, b, c], seed);
        let train: Vec<usize> = (0..n).filter(|i| i % 4 != 3).collect();
        let model = FusionModel::fit(&s, &Source::ALL, &train).unwrap();
        let fused = model.fuse_all(&s).unwrap().select_rows(&train);
        prop_assert_eq!(fused.cols(), a + b + c);
        for (j, var) in column_variances(&fused).iter().enumerate() {
            let col = fused.column(j);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            prop_assert!(mean.abs() < 1e-9);
            // Population variance is 1 unless the training column was constant.
            let pop = var * (col.len() - 1) as f64 / col.len() as f64;
            prop_assert!((pop - 1.0).abs() < 1e-6 || col.iter().all(|&v| v == 0.0), "column {} variance {}", j, pop);
        }
    }

    #[test]
    fn destandardizing_recovers_every_block(n in 3usize..20, seed in any::<u64>()) {
        let s = sources(n, [3, 4, 5], seed);
        let all: Vec<usize> = (0..n).collect();
        let model = FusionModel::fit(&s, &Source::ALL, &all).unwrap();
        let fused = model.fuse_all(&s).unwrap();
        for i in 0..n {
            for (src, block) in model.destandardize(fused.row(i)) {
                let orig = s.get(src).unwrap().row(i);
                for (x, y) in block.iter().zip(orig) {
                    prop_assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn hyf1_round_trip_is_lossless(n in 0usize..20, d in 0usize..9, seed in any::<u64>()) {
        let ids: Vec<String> = (0..n).map(|i| format!("img-{i}")).collect();
        // The payload is f32, so start from f32-representable values.
        let r = random_matrix(n, d, seed);
        let m = Matrix::from_fn(n, d, |i, j| r[(i, j)] as f32 as f64);
        let table = DeepFeatureTable::new(ids, m).unwrap();
        let back = DeepFeatureTable::from_bytes(&table.to_bytes()).unwrap();
        prop_assert_eq!(&back, &table);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.hyf");
        write_deep_features(&table, &path).unwrap();
        prop_assert_eq!(load_deep_features(&path).unwrap(), table);
    }

    #[test]
    fn truncated_hyf1_is_rejected(cut in 1usize..40, seed in any::<u64>()) {
        let table = DeepFeatureTable::new(vec!["a".into(), "b".into()], random_matrix(2, 3, seed)).unwrap();
        let bytes = table.to_bytes();
        let cut = cut.min(bytes.len());
        prop_assert!(DeepFeatureTable::from_bytes(&bytes[..bytes.len() - cut]).is_err());
    }

    #[test]
    fn fer_csv_round_trip(n in 1usize..12, seed in any::<u64>()) {
        let m = random_matrix(n, 48 * 48, seed);
        let ds = LabeledDataset {
            images: (0..n)
                .map(|i| GrayImage::new(48, 48, m.row(i).iter().map(|v| ((v + 1.0) * 127.5).round() / 255.0).collect()).unwrap())
                .collect(),
            labels: (0..n).map(|i| i % 8).collect(),
            split: (0..n).map(|i| if i % 3 == 0 { Split::Test } else { Split::Train }).collect(),
        };
        let mut buf = Vec::new();
        write_fer_csv(&ds, &mut buf).unwrap();
        let back = read_fer_csv(buf.as_slice(), 48, 48).unwrap();
        prop_assert_eq!(&back.labels, &ds.labels);
        prop_assert_eq!(&back.split, &ds.split);
        for (a, b) in back.images.iter().zip(&ds.images) {
            prop_assert_eq!(a.pixels(), b.pixels());
        }
    }
}

#[test]
fn deep_only_fusion_is_the_standardized_deep_block() {
    let s = SourceMatrices {
        vgg: Some(random_matrix(10, 4, 5)),
        ..Default::default()
    };
    let all: Vec<usize> = (0..10).collect();
    let model = FusionModel::fit(&s, &[Source::Vgg], &all).unwrap();
    let fused = model.fuse_all(&s).unwrap();
    let x = s.vgg.as_ref().unwrap();
    let mean = x.column_means();
    for j in 0..4 {
        let sd = (x.column(j).iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / 10.0).sqrt();
        for i in 0..10 {
            assert!((fused[(i, j)] - (x[(i, j)] - mean[j]) / sd).abs() < 1e-12);
        }
    }
}

#[test]
fn distinct_source_sets_of_equal_length_have_distinct_layouts() {
    let s = sources(6, [4, 4, 4], 1);
    let all: Vec<usize> = (0..6).collect();
    let a = FusionModel::fit(&s, &[Source::Vgg, Source::Sift], &all).unwrap();
    let b = FusionModel::fit(&s, &[Source::Sift, Source::Orb], &all).unwrap();
    assert_eq!(a.layout.total_len(), b.layout.total_len());
    assert_ne!(a.layout, b.layout);
}
