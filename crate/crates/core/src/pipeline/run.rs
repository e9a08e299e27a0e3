use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde_json::{json, Value};

use super::config::{DrScope, FeatureSource, RunConfig, SCHEMA_VERSION};
use super::features::{self, Inputs, LoadedData};
use super::report::{
    BlockNormalization, BlockSummary, DatasetSummary, DrSummary, KeypointSummary, Normalization, RunReport, RuntimeInfo,
};
use crate::dataset::Split;
use crate::error::{AtStage, Error, Result, Stage, StageError};
use crate::fusion::{FusionModel, Source, SourceMatrices};
use crate::metrics::{accuracy, confusion};
use crate::numerics::Matrix;
use crate::reduction::{self, FittedReducer};
use crate::rng::SeedStream;

/// Everything a run produces besides the report.
pub struct RunArtifacts {
    pub report: RunReport,
    pub reducer: Option<FittedReducer>,
    pub model: crate::classify::TrainedClassifier,
    pub predictions: Vec<usize>,
}

struct Timer {
    timings: BTreeMap<String, f64>,
    last: Instant,
}

impl Timer {
    fn new() -> Self {
        Timer {
            timings: BTreeMap::new(),
            last: Instant::now(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        *self.timings.entry(stage.into()).or_default() += (now - self.last).as_secs_f64();
        self.last = now;
    }
}

fn fusion_source(s: FeatureSource) -> Source {
    match s {
        FeatureSource::Vgg => Source::Vgg,
        FeatureSource::Sift => Source::Sift,
        FeatureSource::Orb => Source::Orb,
        FeatureSource::Pixels => unreachable!("pixels bypass fusion"),
    }
}

fn class_counts(labels: &[usize], idx: &[usize], c: usize) -> Vec<usize> {
    let mut h = vec![0; c];
    for &i in idx {
        h[labels[i]] += 1;
    }
    h
}

fn stage_err(stage: Stage, msg: String) -> Error {
    Error::Stage {
        stage,
        source: StageError::Other(msg),
    }
}

/// The fused feature matrix of all rows, in dataset order.
struct Features {
    x: Matrix,
    layout: Vec<BlockSummary>,
    keypoints: Vec<KeypointSummary>,
    normalization: Normalization,
    cache_hits: BTreeMap<String, bool>,
}

fn build_features(cfg: &RunConfig, data: &LoadedData, train: &[usize], timer: &mut Timer) -> Result<Features> {
    let sources = cfg.sorted_sources();
    if sources == [FeatureSource::Pixels] {
        let (x, stats) = match &data.inputs {
            Inputs::Images(ds) => {
                let (x, s) = features::pixel_matrix(ds)?;
                (x, Some(s))
            }
            Inputs::Vectors { x, .. } => (x.clone(), None),
        };
        timer.lap("extract");
        return Ok(Features {
            layout: vec![BlockSummary {
                source: "pixels".into(),
                offset: 0,
                len: x.cols(),
            }],
            x,
            keypoints: Vec::new(),
            normalization: Normalization {
                pixels: stats,
                blocks: Vec::new(),
            },
            cache_hits: BTreeMap::new(),
        });
    }
    let Inputs::Images(ds) = &data.inputs else {
        return Err(Error::Config("descriptor and deep sources need an image dataset".into()));
    };
    let mut mats = SourceMatrices::default();
    let mut keypoints = Vec::new();
    let mut cache_hits = BTreeMap::new();
    for &s in &sources {
        match s {
            FeatureSource::Vgg => {
                let (table, _) = data.deep.as_ref().ok_or(Error::MissingDeepFeatures)?;
                mats.set(Source::Vgg, features::deep_matrix(table, ds.len())?);
            }
            FeatureSource::Sift | FeatureSource::Orb => {
                let (m, counts, hit) = features::cached_pooled(cfg, ds, &data.digest, s)?;
                keypoints.push(KeypointSummary {
                    source: s.name().into(),
                    mean: counts.iter().sum::<usize>() as f64 / counts.len().max(1) as f64,
                    min: counts.iter().copied().min().unwrap_or(0),
                    max: counts.iter().copied().max().unwrap_or(0),
                    images_without_keypoints: counts.iter().filter(|&&c| c == 0).count(),
                });
                cache_hits.insert(s.name().into(), hit);
                mats.set(fusion_source(s), m);
            }
            FeatureSource::Pixels => unreachable!("validated"),
        }
    }
    timer.lap("extract");
    let enabled: Vec<Source> = sources.iter().map(|&s| fusion_source(s)).collect();
    let model = FusionModel::fit(&mats, &enabled, train).at(Stage::Fuse)?;
    let x = model.fuse_all(&mats).at(Stage::Fuse)?;
    timer.lap("fuse");
    Ok(Features {
        x,
        layout: model
            .layout
            .blocks
            .iter()
            .map(|b| BlockSummary {
                source: b.source.name().into(),
                offset: b.offset,
                len: b.len,
            })
            .collect(),
        keypoints,
        normalization: Normalization {
            pixels: None,
            blocks: model
                .layout
                .blocks
                .iter()
                .zip(&model.standardizers)
                .map(|(b, st)| BlockNormalization {
                    source: b.source.name().into(),
                    mean: st.mean.clone(),
                    std: st.std.clone(),
                })
                .collect(),
        },
        cache_hits,
    })
}

fn unstated_choices(cfg: &RunConfig) -> BTreeMap<String, Value> {
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: Value| {
        m.insert(k.to_string(), v);
    };
    put("split", json!("Usage == \"Training\" is train, every other value is test"));
    put("dr_scope", json!(cfg.dr_scope));
    put(
        "pooling",
        json!({
            "k_sift": cfg.k_sift,
            "k_orb": cfg.k_orb,
            "rule": "k-means++ centroids sorted lexicographically; fewer descriptors than K are repeated whole and zero-padded",
            "kmeans_max_iter": crate::selection::DEFAULT_MAX_ITER,
            "kmeans_restarts": crate::selection::DEFAULT_N_INIT,
        }),
    );
    put("block_standardization", json!("per-column z-score with train-split mean and population std; constant columns map to 0"));
    put("pixel_normalization", json!("(p - mean) / std with train-split pixel statistics"));
    put("sift", serde_json::to_value(&cfg.sift).expect("serializes"));
    put("orb", serde_json::to_value(&cfg.orb).expect("serializes"));
    put("classifier", serde_json::to_value(&cfg.classifier).expect("serializes"));
    put(
        "reducer",
        match &cfg.reducer {
            Some(r) => serde_json::to_value(r).expect("serializes"),
            None => json!("none: features go to the classifier directly"),
        },
    );
    put(
        "out_of_sample",
        json!("PCA projects exactly; other reducers use inverse-distance barycentric weights over oos_neighbors training rows"),
    );
    put("seeds", json!("reducer seed = run seed; pooling and classifier seeds derived from the run seed by label"));
    m
}

/// Runs the full chain for one config without writing anything.
pub fn execute(cfg: &RunConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    if let Some(r) = &mut cfg.reducer {
        r.seed = cfg.seed;
    }
    let cfg = &cfg;
    let mut timer = Timer::new();
    let data = features::load(cfg)?;
    let train = data.indices(Split::Train);
    let test = data.indices(Split::Test);
    if train.is_empty() || test.is_empty() {
        return Err(stage_err(
            Stage::Load,
            format!("need rows in both splits (train {}, test {})", train.len(), test.len()),
        ));
    }
    let labels = data.labels().to_vec();
    if let Some(&bad) = labels.iter().find(|&&l| l >= data.n_classes) {
        return Err(stage_err(Stage::Load, format!("label {bad} out of range")));
    }
    timer.lap("load");

    let feats = build_features(cfg, &data, &train, &mut timer)?;
    let fx = &feats.x;

    let mut reducer = None;
    let (train_x, test_x) = match &cfg.reducer {
        None => (fx.select_rows(&train), fx.select_rows(&test)),
        Some(spec) => {
            if spec.target_dim >= fx.cols() {
                return Err(Error::DimTooLarge {
                    d: spec.target_dim,
                    max: fx.cols(),
                });
            }
            let out = match cfg.dr_scope {
                DrScope::TrainOnly => {
                    let r = reduction::fit(&fx.select_rows(&train), spec).at(Stage::Reduce)?;
                    let t = reduction::transform(&r, &fx.select_rows(&test)).at(Stage::Reduce)?;
                    let e = r.embedding.clone();
                    reducer = Some(r);
                    (e, t)
                }
                DrScope::Transductive => {
                    let r = reduction::fit(fx, spec).at(Stage::Reduce)?;
                    let out = (r.embedding.select_rows(&train), r.embedding.select_rows(&test));
                    reducer = Some(r);
                    out
                }
            };
            timer.lap("reduce");
            out
        }
    };

    let y_train: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let y_test: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
    let seed = SeedStream::new(cfg.seed).child("classifier").seed();
    let model = cfg.classifier.train(&train_x, &y_train, seed).at(Stage::Classify)?;
    let predictions = model.predict(&test_x).at(Stage::Classify)?;
    timer.lap("classify");

    let n_classes = data.n_classes.max(predictions.iter().max().map_or(0, |m| m + 1));
    let cm = confusion(&y_test, &predictions, n_classes).at(Stage::Evaluate)?;
    let acc = accuracy(&cm).at(Stage::Evaluate)?;
    timer.lap("evaluate");

    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        dataset: DatasetSummary {
            n_train: train.len(),
            n_test: test.len(),
            n_classes,
            train_class_counts: class_counts(&labels, &train, n_classes),
            test_class_counts: class_counts(&labels, &test, n_classes),
            sha256: data.digest.clone(),
            deep_features_sha256: data.deep.as_ref().map(|(_, h)| h.clone()),
        },
        feature_dim: fx.cols(),
        layout: feats.layout,
        keypoints: feats.keypoints,
        accuracy: acc,
        per_class: cm.per_class(),
        confusion: cm.counts,
        reduction: reducer.as_ref().map(|r| DrSummary {
            method: r.spec.method,
            target_dim: r.spec.target_dim,
            scope: cfg.dr_scope,
            diagnostics: r.diagnostics.clone(),
        }),
        normalization: feats.normalization,
        unstated_choices: unstated_choices(cfg),
        runtime: RuntimeInfo {
            timings: BTreeMap::new(),
            cache_hits: feats.cache_hits,
        },
        canonical_sha256: String::new(),
    };
    timer.timings.insert("total".into(), timer.timings.values().sum());
    report.runtime.timings = timer.timings;
    report.canonical_sha256 = report.canonical_hash();
    Ok(RunArtifacts {
        report,
        reducer,
        model,
        predictions,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes report.json, confusion.csv, predictions.csv and the model blobs.
pub fn write_artifacts(out: &Path, a: &RunArtifacts) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write(&out.join("report.json"), a.report.to_json().as_bytes())?;
    let cm = crate::metrics::ConfusionMatrix {
        counts: a.report.confusion.clone(),
    };
    write(&out.join("confusion.csv"), cm.to_csv().as_bytes())?;
    let mut preds = String::from("test_index,predicted\n");
    for (i, p) in a.predictions.iter().enumerate() {
        preds.push_str(&format!("{i},{p}\n"));
    }
    write(&out.join("predictions.csv"), preds.as_bytes())?;
    write(&out.join("classifier.bin"), &a.model.to_bytes())?;
    if let Some(r) = &a.reducer {
        write(&out.join("reducer.bin"), &r.to_bytes())?;
    }
    Ok(())
}

/// Runs one config and writes its artifacts under the output directory.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunReport> {
    let a = execute(cfg)?;
    write_artifacts(&cfg.out_dir(), &a)?;
    Ok(a.report)
}
