use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::{DrScope, FeatureSource, RunConfig};
use super::features::{self, Inputs};
use super::report::RunReport;
use super::run::{execute, write_artifacts};
use crate::classify::{ClassifierSpec, KnnParams, MlpParams, RfParams};
use crate::error::{Error, Result};
use crate::reduction::{Method, ReducerSpec};

/// Config fields a grid may vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Sources,
    Reducer,
    Classifier,
    TargetDim,
    Seed,
    DrScope,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Sources => "sources",
            Axis::Reducer => "reducer",
            Axis::Classifier => "classifier",
            Axis::TargetDim => "target_dim",
            Axis::Seed => "seed",
            Axis::DrScope => "dr_scope",
        }
    }

    fn label(self, cfg: &RunConfig) -> String {
        match self {
            Axis::Sources => cfg.sorted_sources().iter().map(|s| s.name()).collect::<Vec<_>>().join("+"),
            Axis::Reducer => cfg.reducer.as_ref().map_or("none".into(), |r| r.method.name().to_string()),
            Axis::Classifier => cfg.classifier.name().into(),
            Axis::TargetDim => cfg.reducer.as_ref().map_or("-".into(), |r| r.target_dim.to_string()),
            Axis::Seed => cfg.seed.to_string(),
            Axis::DrScope => match cfg.dr_scope {
                DrScope::TrainOnly => "train_only".into(),
                DrScope::Transductive => "transductive".into(),
            },
        }
    }

    /// Blanks this axis in a JSON rendering of a config.
    fn erase(self, v: &mut Value) {
        let obj = v.as_object_mut().expect("config is an object");
        match self {
            Axis::Sources => {
                obj.remove("sources");
            }
            Axis::Reducer => {
                obj.remove("reducer");
            }
            Axis::Classifier => {
                obj.remove("classifier");
            }
            Axis::TargetDim => {
                if let Some(r) = obj.get_mut("reducer").and_then(Value::as_object_mut) {
                    r.remove("target_dim");
                }
            }
            Axis::Seed => {
                obj.remove("seed");
            }
            Axis::DrScope => {
                obj.remove("dr_scope");
            }
        }
    }
}

/// One axis of a grid file and the values it takes; axes combine as a product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum AxisValues {
    Sources(Vec<Vec<FeatureSource>>),
    Reducer(Vec<Option<ReducerSpec>>),
    Classifier(Vec<ClassifierSpec>),
    TargetDim(Vec<usize>),
    Seed(Vec<u64>),
    DrScope(Vec<DrScope>),
}

impl AxisValues {
    pub fn axis(&self) -> Axis {
        match self {
            AxisValues::Sources(_) => Axis::Sources,
            AxisValues::Reducer(_) => Axis::Reducer,
            AxisValues::Classifier(_) => Axis::Classifier,
            AxisValues::TargetDim(_) => Axis::TargetDim,
            AxisValues::Seed(_) => Axis::Seed,
            AxisValues::DrScope(_) => Axis::DrScope,
        }
    }

    fn apply(&self, cfg: &RunConfig) -> Vec<RunConfig> {
        let with = |f: &dyn Fn(&mut RunConfig)| {
            let mut c = cfg.clone();
            f(&mut c);
            c
        };
        match self {
            AxisValues::Sources(v) => v.iter().map(|s| with(&|c| c.sources = s.clone())).collect(),
            AxisValues::Reducer(v) => v.iter().map(|r| with(&|c| c.reducer = r.clone())).collect(),
            AxisValues::Classifier(v) => v.iter().map(|k| with(&|c| c.classifier = k.clone())).collect(),
            AxisValues::TargetDim(v) => v
                .iter()
                .map(|&d| {
                    with(&|c| {
                        c.reducer.get_or_insert_with(|| ReducerSpec::new(Method::Pca, d)).target_dim = d;
                    })
                })
                .collect(),
            AxisValues::Seed(v) => v.iter().map(|&s| with(&|c| c.seed = s)).collect(),
            AxisValues::DrScope(v) => v.iter().map(|&s| with(&|c| c.dr_scope = s)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFile {
    pub axes: Vec<AxisValues>,
}

/// Cartesian product of the axes over `base`, first axis outermost.
pub fn expand(base: &RunConfig, axes: &[AxisValues]) -> Vec<RunConfig> {
    let mut cells = vec![base.clone()];
    for a in axes {
        cells = cells.iter().flat_map(|c| a.apply(c)).collect();
    }
    cells
}

/// The five source rows of the feature-combination table. The first row is
/// the no-extraction baseline: normalized pixels, no reducer.
pub fn table1(base: &RunConfig) -> Vec<RunConfig> {
    use FeatureSource::*;
    let mut cells = Vec::new();
    for s in [vec![Pixels], vec![Vgg], vec![Vgg, Orb], vec![Vgg, Sift], vec![Vgg, Sift, Orb]] {
        let mut c = base.clone();
        if s == [Pixels] {
            c.reducer = None;
        } else if c.reducer.is_none() {
            c.reducer = Some(ReducerSpec::new(Method::Pca, 16));
        }
        c.sources = s;
        cells.push(c);
    }
    cells
}

pub const TABLE1_AXES: [Axis; 2] = [Axis::Sources, Axis::Reducer];

/// Six reducers × three classifiers on the base sources.
pub fn table2(base: &RunConfig) -> Vec<RunConfig> {
    let d = base.reducer.as_ref().map_or(16, |r| r.target_dim);
    let reducers: Vec<Option<ReducerSpec>> = Method::ALL
        .iter()
        .map(|&m| {
            let mut r = base.reducer.clone().unwrap_or_else(|| ReducerSpec::new(m, d));
            r.method = m;
            Some(r)
        })
        .collect();
    let classifiers = vec![
        ClassifierSpec::Rf(RfParams::default()),
        ClassifierSpec::Knn(KnnParams::default()),
        ClassifierSpec::Mlp(MlpParams::default()),
    ];
    expand(base, &[AxisValues::Reducer(reducers), AxisValues::Classifier(classifiers)])
}

pub const TABLE2_AXES: [Axis; 2] = [Axis::Reducer, Axis::Classifier];

/// Checks that the cells agree on every field outside `axes`.
pub fn check_consistent(cells: &[RunConfig], axes: &[Axis]) -> Result<()> {
    let strip = |c: &RunConfig| {
        let mut v = serde_json::to_value(c).expect("config serializes");
        // Output locations are per cell by construction.
        let obj = v.as_object_mut().unwrap();
        obj.remove("out");
        obj.remove("cache_dir");
        for a in axes {
            a.erase(&mut v);
        }
        v
    };
    let Some(first) = cells.first() else {
        return Err(Error::InconsistentGrid("grid has no cells".into()));
    };
    let reference = strip(first);
    for (i, c) in cells.iter().enumerate().skip(1) {
        if strip(c) != reference || c.base_dir != first.base_dir {
            return Err(Error::InconsistentGrid(format!(
                "cell {i} differs from cell 0 outside the declared axes {:?}",
                axes.iter().map(|a| a.name()).collect::<Vec<_>>()
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub index: usize,
    /// (axis, value) pairs.
    pub labels: Vec<(String, String)>,
    pub accuracy: f64,
    pub canonical_sha256: String,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridTable {
    pub axes: Vec<String>,
    pub cells: Vec<CellResult>,
}

impl GridTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["cell".to_string()];
        header.extend(self.axes.iter().cloned());
        header.extend(["accuracy".to_string(), "canonical_sha256".to_string()]);
        w.write_record(&header).expect("in-memory write");
        for c in &self.cells {
            let mut rec = vec![c.index.to_string()];
            rec.extend(c.labels.iter().map(|(_, v)| v.clone()));
            rec.push(format!("{:.6}", c.accuracy));
            rec.push(c.canonical_sha256.clone());
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn accuracy_of(&self, axis: &str, value: &str) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.labels.iter().any(|(a, v)| a == axis && v == value))
            .map(|c| c.accuracy)
    }
}

/// Extracts every local source once before the cells fan out, so parallel
/// cells read the cache instead of racing to fill it.
fn warm_cache(cells: &[RunConfig]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for c in cells {
        let locals: Vec<FeatureSource> = c
            .sorted_sources()
            .into_iter()
            .filter(|s| matches!(s, FeatureSource::Sift | FeatureSource::Orb))
            .collect();
        if locals.is_empty() {
            continue;
        }
        let mut probe = c.clone();
        probe.sources.retain(|s| locals.contains(s));
        let data = features::load(&probe)?;
        let Inputs::Images(ds) = &data.inputs else { continue };
        for s in locals {
            let key = (c.cache_path(), features::cache_key(c, &data.digest, s));
            if seen.insert(key) {
                features::cached_pooled(c, ds, &data.digest, s)?;
            }
        }
    }
    Ok(())
}

/// Runs every cell (in parallel, at most `workers` at a time) under
/// `out/cells/NN`, sharing one feature cache, then writes `table.csv` and
/// `table.json` to `out`.
pub fn run_cells(cells: Vec<RunConfig>, axes: &[Axis], out: &Path, workers: usize) -> Result<(GridTable, Vec<RunReport>)> {
    check_consistent(&cells, axes)?;
    for c in &cells {
        c.validate()?;
    }
    let cache = out.join("cache");
    let cells: Vec<RunConfig> = cells
        .into_iter()
        .enumerate()
        .map(|(i, mut c)| {
            c.out = out.join("cells").join(format!("{i:02}"));
            c.cache_dir = Some(cache.clone());
            c
        })
        .collect();
    warm_cache(&cells)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let runs: Vec<_> = pool.install(|| cells.par_iter().map(execute).collect::<Result<Vec<_>>>())?;
    // Reports are written one after another, in cell order.
    let mut results = Vec::new();
    let mut reports = Vec::new();
    for (i, (c, a)) in cells.iter().zip(runs).enumerate() {
        write_artifacts(&c.out_dir(), &a)?;
        results.push(CellResult {
            index: i,
            labels: axes.iter().map(|ax| (ax.name().to_string(), ax.label(c))).collect(),
            accuracy: a.report.accuracy,
            canonical_sha256: a.report.canonical_sha256.clone(),
            out: c.out.clone(),
        });
        reports.push(a.report);
    }
    let table = GridTable {
        axes: axes.iter().map(|a| a.name().to_string()).collect(),
        cells: results,
    };
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let csv_path = out.join("table.csv");
    std::fs::write(&csv_path, table.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
    let json_path = out.join("table.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&table).expect("table serializes"))
        .map_err(|e| Error::io(&json_path, e))?;
    Ok((table, reports))
}

/// Ablation over explicit cells whose configs may differ only along `axes`.
pub fn run_ablation(cells: Vec<RunConfig>, axes: &[Axis], out: &Path, workers: usize) -> Result<(GridTable, Vec<RunReport>)> {
    run_cells(cells, axes, out, workers)
}

pub const DEFAULT_SWEEP_DIMS: [usize; 5] = [2, 4, 8, 16, 32];

/// Accuracy per target dimension per reducer. Every dimension must be below
/// the fused feature dimension.
pub fn run_dim_sweep(
    base: &RunConfig,
    dims: &[usize],
    methods: &[Method],
    out: &Path,
    workers: usize,
) -> Result<(GridTable, Vec<RunReport>)> {
    base.validate()?;
    if dims.is_empty() {
        return Err(Error::Config("sweep needs at least one dimension".into()));
    }
    let data = features::load(base)?;
    let max = features::feature_dim(base, &data);
    if let Some(&d) = dims.iter().find(|&&d| d == 0 || d >= max) {
        return Err(Error::DimTooLarge { d, max });
    }
    let template = base.reducer.clone().unwrap_or_else(|| ReducerSpec::new(Method::Pca, dims[0]));
    let methods = if methods.is_empty() { vec![template.method] } else { methods.to_vec() };
    let mut cells = Vec::new();
    for &m in &methods {
        for &d in dims {
            let mut c = base.clone();
            let mut r = template.clone();
            r.method = m;
            r.target_dim = d;
            c.reducer = Some(r);
            cells.push(c);
        }
    }
    run_cells(cells, &[Axis::Reducer, Axis::TargetDim], out, workers)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_shapes() {
        let base = RunConfig::default();
        assert_eq!(table1(&base).len(), 5);
        let t2 = table2(&base);
        assert_eq!(t2.len(), 18);
        check_consistent(&t2, &TABLE2_AXES).unwrap();
        check_consistent(&table1(&base), &TABLE1_AXES).unwrap();
    }

    #[test]
    fn undeclared_difference_is_rejected() {
        let base = RunConfig::default();
        let mut other = base.clone();
        other.k_sift = 8;
        assert!(matches!(
            check_consistent(&[base, other], &[Axis::Sources]),
            Err(Error::InconsistentGrid(_))
        ));
    }

    #[test]
    fn grid_file_product() {
        let g: GridFile = serde_json::from_str(
            r#"{"axes":[{"axis":"target_dim","values":[2,4,8]},{"axis":"classifier","values":[{"kind":"rf"},{"kind":"knn"}]}]}"#,
        )
        .unwrap();
        let cells = expand(&RunConfig::default(), &g.axes);
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[1].classifier.name(), "knn");
        assert_eq!(cells[2].reducer.as_ref().unwrap().target_dim, 4);
    }
}
