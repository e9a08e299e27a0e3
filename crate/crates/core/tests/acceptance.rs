//! One line per acceptance criterion; exits non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use hyfacial::classify::{knn_predict, mlp_loss_and_grad, ClassifierSpec, KnnParams, MlpModel, MlpParams};
use hyfacial::metrics::{knn_purity, spearman};
use hyfacial::numerics::{geodesic_distances, knn_graph, sym_eig, Matrix, Metric};
use hyfacial::pipeline::{
    run_ablation, run_dim_sweep, run_pipeline, table1, DrScope, FeatureSource, RunConfig,
    TABLE1_AXES,
};
use hyfacial::reduction::{
    fit, joint_probabilities, kl_gradient, lle_weights, pca_fit, DisconnectedPolicy, Method, ReducerSpec,
};
use hyfacial::selection::kmeans_fit;
use hyfacial::synthetic::{gaussian_clusters, swiss_roll};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fer_config(out: &std::path::Path) -> RunConfig {
    let mut cfg = RunConfig::load(fixtures_dir().join("fer_tiny_config.json")).unwrap();
    cfg.out = out.to_path_buf();
    cfg
}

fn synthetic_config(out: &std::path::Path) -> RunConfig {
    let mut cfg = RunConfig::load(fixtures_dir().join("signal_in_noise_config.json")).unwrap();
    cfg.out = out.to_path_buf();
    cfg
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    for seed in 0..5 {
        let x = random_matrix(200, 4, seed);
        let g = knn_graph(&x, 10, Metric::Euclidean).map_err(|e| e.to_string())?;
        for (i, row) in exhaustive_knn(&x, 10).iter().enumerate() {
            let idx: Vec<usize> = row.iter().map(|p| p.0).collect();
            if g.indices[i] != idx {
                return Err(format!("knn_graph row {i} differs (seed {seed})"));
            }
        }
        let x = random_matrix(50, 3, seed);
        let g = knn_graph(&x, 6, Metric::Euclidean).unwrap();
        if g.components().len() == 1 {
            let d = geodesic_distances(&g).unwrap();
            let fw = floyd_warshall(&g);
            for i in 0..50 {
                for j in 0..50 {
                    if (d[(i, j)] - fw[i][j]).abs() > 1e-12 * fw[i][j].max(1.0) {
                        return Err(format!("geodesic ({i}, {j}) differs (seed {seed})"));
                    }
                }
            }
        }
        let x = random_matrix(12, 2, seed);
        for k in 1..=3 {
            let c = kmeans_fit(&x, k, 100, seed).unwrap();
            let best = optimal_inertia(&x, k);
            if c.inertia > best * (1.0 + 1e-9) + 1e-12 {
                return Err(format!("kmeans k={k} inertia {} above optimum {best}", c.inertia));
            }
        }
        let x = random_matrix(120, 3, seed);
        let y: Vec<usize> = (0..120).map(|i| i % 4).collect();
        let q = random_matrix(40, 3, seed + 100);
        if knn_predict(&x, &y, &q, 5).unwrap() != brute_force_votes(&x, &y, &q, 5) {
            return Err(format!("knn_predict differs from brute force (seed {seed})"));
        }
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(60), format!("exact agreement on 5 seeds in {:.2}s", t.as_secs_f64()))
}

fn numerical_checks() -> Check {
    let x = random_matrix(12, 5, 1);
    let p = joint_probabilities(&x, 4.0);
    let y = random_matrix(12, 2, 2);
    let tsne = tsne_gradient_error(&p, &y, &kl_gradient(&p, &y, 1.0), 1e-5);

    let mut m = MlpModel::init(&[4, 5, 3], 7);
    for b in &mut m.biases {
        for (i, v) in b.iter_mut().enumerate() {
            *v = 0.05 * (i as f64 + 1.0);
        }
    }
    let xm = random_matrix(6, 4, 3);
    let ym = vec![0, 1, 2, 0, 1, 2];
    let (_, g) = mlp_loss_and_grad(&m, &xm, &ym).unwrap();
    let mlp = mlp_gradient_error(&m, |mm| mlp_loss_and_grad(mm, &xm, &ym).unwrap().0, &g, 1e-5);

    let a = random_matrix(20, 20, 4);
    let s = Matrix::from_fn(20, 20, |i, j| a[(i, j)] + a[(j, i)]);
    let e = sym_eig(&s).unwrap();
    let residual = eig_residual(&s, &e.eigenvalues, &e.eigenvectors);

    let w = lle_weights(&random_matrix(60, 4, 5), 8).unwrap();
    let lle = w.weights.iter().map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);

    let mds = fit(&random_matrix(40, 5, 9), &ReducerSpec::new(Method::Mds, 2)).unwrap();
    let monotone = mds.diagnostics.stress_history.windows(2).all(|w| w[1] <= w[0]);

    let xp = random_matrix(80, 6, 4);
    let r = pca_fit(&xp, 3).unwrap();
    let mean = xp.column_means();
    let cov = Matrix::from_fn(6, 6, |i, j| {
        (0..80).map(|r| (xp[(r, i)] - mean[i]) * (xp[(r, j)] - mean[j])).sum::<f64>() / 79.0
    });
    let ev = sym_eig(&cov).unwrap().eigenvalues;
    let pca = column_variances(&r.embedding)
        .iter()
        .zip(&ev)
        .map(|(v, l)| (v - l).abs() / l)
        .fold(0.0, f64::max);

    let detail = format!(
        "t-SNE grad rel err {tsne:.1e}, MLP grad rel err {mlp:.1e}, eig residual {residual:.1e}, \
         LLE row-sum err {lle:.1e}, MDS stress monotone {monotone}, PCA variance rel err {pca:.1e}"
    );
    ensure(
        tsne < 1e-4 && mlp < 1e-4 && residual < 1e-8 && lle < 1e-9 && monotone && pca < 1e-6,
        detail,
    )
}

fn manifold_recovery() -> Check {
    let (x, labels) = gaussian_clusters(150, 10, 3, 10.0, 11);
    let mut parts = Vec::new();
    let mut ok = true;
    for method in [Method::Tsne, Method::Umap, Method::Isomap, Method::Lle] {
        let mut spec = ReducerSpec::new(method, 2).with_seed(11);
        if method == Method::Isomap {
            spec.disconnected = DisconnectedPolicy::Bridge;
        }
        let start = Instant::now();
        let r = fit(&x, &spec).map_err(|e| format!("{}: {e}", method.name()))?;
        let t = start.elapsed();
        let purity = knn_purity(&r.embedding, &labels);
        ok &= purity >= 0.95 && t < Duration::from_secs(120);
        parts.push(format!("{} purity {purity:.3} ({:.1}s)", method.name(), t.as_secs_f64()));
    }
    let (roll, _) = swiss_roll(400, 5);
    let mut spec = ReducerSpec::new(Method::Isomap, 2);
    spec.n_neighbors = Some(6);
    let start = Instant::now();
    let r = fit(&roll, &spec).map_err(|e| e.to_string())?;
    let t = start.elapsed();
    let geo = geodesic_distances(&knn_graph(&roll, 6, Metric::Euclidean).unwrap()).unwrap();
    let mut g = Vec::new();
    for i in 0..400 {
        for j in i + 1..400 {
            g.push(geo[(i, j)]);
        }
    }
    let rho = spearman(&g, &pair_distances(&r.embedding));
    ok &= rho >= 0.9 && t < Duration::from_secs(120);
    parts.push(format!("swiss roll Spearman {rho:.3} ({:.1}s)", t.as_secs_f64()));
    ensure(ok, parts.join(", "))
}

fn table1_echo() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let base = fer_config(&dir.path().join("base"));
    let mut cells = table1(&base);
    for s in [FeatureSource::Sift, FeatureSource::Orb] {
        let mut c = base.clone();
        c.sources = vec![s];
        cells.push(c);
    }
    let start = Instant::now();
    let (_, reports) = run_ablation(cells, &TABLE1_AXES, dir.path(), 4).map_err(|e| e.to_string())?;
    let t = start.elapsed();
    let label = |r: &hyfacial::pipeline::RunReport| {
        r.config.sorted_sources().iter().map(|s| s.name()).collect::<Vec<_>>().join("+")
    };
    let acc = |name: &str| reports.iter().find(|r| label(r) == name).map(|r| r.accuracy).unwrap();
    let full = acc("vgg+sift+orb");
    let singles = ["pixels", "vgg", "sift", "orb"];
    let detail = format!(
        "{}; full fusion {full:.3}; {:.1}s",
        reports.iter().map(|r| format!("{} {:.3}", label(r), r.accuracy)).collect::<Vec<_>>().join(", "),
        t.as_secs_f64()
    );
    ensure(singles.iter().all(|s| full >= acc(s)) && t < Duration::from_secs(600), detail)
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let mut configs = vec![fer_config(dir.path())];
    let mut umap = synthetic_config(dir.path());
    umap.reducer = Some(ReducerSpec::new(Method::Umap, 8));
    umap.classifier = ClassifierSpec::Mlp(MlpParams::default());
    configs.push(umap);
    let mut tsne = synthetic_config(dir.path());
    tsne.reducer = Some(ReducerSpec::new(Method::Tsne, 2));
    tsne.classifier = ClassifierSpec::Knn(KnnParams::default());
    tsne.dr_scope = DrScope::Transductive;
    configs.push(tsne);
    let mut hashes = Vec::new();
    for (i, cfg) in configs.iter().enumerate() {
        let mut a = cfg.clone();
        a.out = dir.path().join(format!("{i}a"));
        let mut b = cfg.clone();
        b.out = dir.path().join(format!("{i}b"));
        let (ha, hb) = (
            run_pipeline(&a).map_err(|e| e.to_string())?.canonical_hash(),
            run_pipeline(&b).map_err(|e| e.to_string())?.canonical_hash(),
        );
        if ha != hb {
            return Err(format!("config {i}: {ha} != {hb}"));
        }
        hashes.push(ha[..12].to_string());
    }
    Ok(format!("3 configs, equal hashes on rerun ({})", hashes.join(", ")))
}

fn dim_sweep_shape() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let mut base = synthetic_config(dir.path());
    base.reducer = Some(ReducerSpec::new(Method::Pca, 16));
    let (table, _) = run_dim_sweep(&base, &[2, 16], &[Method::Pca], dir.path(), 2).map_err(|e| e.to_string())?;
    let (a2, a16) = (table.cells[0].accuracy, table.cells[1].accuracy);
    ensure(a16 >= a2, format!("PCA accuracy d=2 {a2:.3}, d=16 {a16:.3}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 6] = [
        ("oracle equivalence", oracle_equivalence),
        ("numerical checks", numerical_checks),
        ("manifold recovery", manifold_recovery),
        ("fusion beats single sources on the fixture", table1_echo),
        ("determinism", determinism),
        ("dimension sweep shape", dim_sweep_shape),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(d) => println!("PASS  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
