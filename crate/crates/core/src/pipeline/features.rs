use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{DatasetSpec, FeatureSource, RunConfig};
use crate::codec::{BlobReader, BlobWriter};
use crate::dataset::{self, LabeledDataset, PixelStats, Split};
use crate::descriptors::{orb_detect_describe, sift_with_params, DescriptorSet};
use crate::error::{AtStage, Error, Result, Stage, StageError};
use crate::fusion::DeepFeatureTable;
use crate::numerics::Matrix;
use crate::rng::SeedStream;
use crate::selection::pool_descriptors;
use crate::synthetic::signal_in_noise;

const CACHE_MAGIC: [u8; 4] = *b"HYFM";
const CACHE_VERSION: u32 = 1;

/// Input rows and labels, either images or ready-made vectors.
pub enum Inputs {
    Images(LabeledDataset),
    Vectors { x: Matrix, labels: Vec<usize>, split: Vec<Split> },
}

pub struct LoadedData {
    pub inputs: Inputs,
    pub n_classes: usize,
    /// sha256 of the dataset file, or of the generator parameters.
    pub digest: String,
    pub deep: Option<(DeepFeatureTable, String)>,
}

impl LoadedData {
    pub fn labels(&self) -> &[usize] {
        match &self.inputs {
            Inputs::Images(ds) => &ds.labels,
            Inputs::Vectors { labels, .. } => labels,
        }
    }

    pub fn split(&self) -> &[Split] {
        match &self.inputs {
            Inputs::Images(ds) => &ds.split,
            Inputs::Vectors { split, .. } => split,
        }
    }

    pub fn indices(&self, which: Split) -> Vec<usize> {
        (0..self.labels().len()).filter(|&i| self.split()[i] == which).collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn load(cfg: &RunConfig) -> Result<LoadedData> {
    let (inputs, n_classes, digest) = match &cfg.dataset {
        DatasetSpec::FerCsv { path } => {
            let p = cfg.resolve(path);
            let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
            let ds = dataset::read_fer_csv(bytes.as_slice(), dataset::IMAGE_SIDE, dataset::IMAGE_SIDE).at(Stage::Load)?;
            (Inputs::Images(ds), dataset::NUM_CLASSES, sha256_hex(&bytes))
        }
        DatasetSpec::SignalInNoise { n, seed, test_every } => {
            let (x, labels) = signal_in_noise(*n, *seed);
            let split = (0..*n)
                .map(|i| if i % test_every == test_every - 1 { Split::Test } else { Split::Train })
                .collect();
            let digest = sha256_hex(format!("signal_in_noise/{n}/{seed}/{test_every}").as_bytes());
            (Inputs::Vectors { x, labels, split }, 3, digest)
        }
    };
    let deep = match (&cfg.deep_features, cfg.has(FeatureSource::Vgg)) {
        (Some(p), true) => {
            let p = cfg.resolve(p);
            let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
            let table = DeepFeatureTable::from_bytes(&bytes).at(Stage::Load)?;
            Some((table, sha256_hex(&bytes)))
        }
        (None, true) => return Err(Error::MissingDeepFeatures),
        _ => None,
    };
    Ok(LoadedData {
        inputs,
        n_classes,
        digest,
        deep,
    })
}

/// Deep rows reordered to dataset order; ids must be the row indices.
pub fn deep_matrix(table: &DeepFeatureTable, n: usize) -> Result<Matrix> {
    if table.len() != n {
        return Err(Error::Stage {
            stage: Stage::Load,
            source: StageError::Other(format!("deep-feature file has {} rows, the dataset {n}", table.len())),
        });
    }
    let mut out = Matrix::zeros(n, table.dim());
    for i in 0..n {
        let pos = table.position(&i.to_string()).ok_or_else(|| Error::Stage {
            stage: Stage::Load,
            source: StageError::Other(format!("deep-feature file has no row with id \"{i}\"")),
        })?;
        out.row_mut(i).copy_from_slice(table.vectors.row(pos));
    }
    Ok(out)
}

/// Flattened `(p − μ) / σ` pixels with train-split statistics.
pub fn pixel_matrix(ds: &LabeledDataset) -> Result<(Matrix, PixelStats)> {
    let stats = ds.pixel_stats(Split::Train);
    let std = if stats.std > 0.0 { stats.std } else { 1.0 };
    let d = ds.images.first().map_or(0, |im| im.pixels().len());
    let mut data = Vec::with_capacity(ds.len() * d);
    for img in &ds.images {
        data.extend(dataset::normalize(img, stats.mean, std).at(Stage::Extract)?.into_vec());
    }
    Ok((Matrix::from_raw(ds.len(), d, data), PixelStats { mean: stats.mean, std }))
}

fn describe(cfg: &RunConfig, s: FeatureSource, img: &dataset::GrayImage) -> Result<DescriptorSet> {
    match s {
        FeatureSource::Sift => sift_with_params(img, &cfg.sift).at(Stage::Extract),
        FeatureSource::Orb => orb_detect_describe(img, &cfg.orb).at(Stage::Extract),
        _ => unreachable!("only local descriptors are pooled"),
    }
}

pub fn pool_k(cfg: &RunConfig, s: FeatureSource) -> usize {
    match s {
        FeatureSource::Sift => cfg.k_sift,
        FeatureSource::Orb => cfg.k_orb,
        _ => 0,
    }
}

/// Pooled, flattened descriptor matrix (N × K·d) for one local source, plus
/// the raw keypoint count of every image.
pub fn pooled_matrix(cfg: &RunConfig, ds: &LabeledDataset, s: FeatureSource) -> Result<(Matrix, Vec<usize>)> {
    let k = pool_k(cfg, s);
    let stream = SeedStream::new(cfg.seed).child("pool").child(s.name());
    let rows: Vec<(Vec<f64>, usize)> = ds
        .images
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            let set = describe(cfg, s, img)?;
            let pooled = pool_descriptors(&set, k, stream.indexed(i as u64).seed());
            Ok((pooled.into_vec(), set.len()))
        })
        .collect::<Result<_>>()?;
    let width = rows.first().map_or(0, |r| r.0.len());
    let mut data = Vec::with_capacity(rows.len() * width);
    let mut counts = Vec::with_capacity(rows.len());
    for (r, c) in rows {
        data.extend(r);
        counts.push(c);
    }
    Ok((Matrix::from_raw(counts.len(), width, data), counts))
}

/// Content key of one pooled source: everything its values depend on.
pub fn cache_key(cfg: &RunConfig, digest: &str, s: FeatureSource) -> String {
    let params = match s {
        FeatureSource::Sift => serde_json::to_string(&cfg.sift),
        FeatureSource::Orb => serde_json::to_string(&cfg.orb),
        _ => Ok(String::new()),
    }
    .expect("params serialize");
    let text = format!("v{CACHE_VERSION}|{digest}|{}|k={}|seed={}|{params}", s.name(), pool_k(cfg, s), cfg.seed);
    sha256_hex(text.as_bytes())
}

fn cache_file(dir: &Path, s: FeatureSource, key: &str) -> PathBuf {
    dir.join(format!("{}-{}.bin", s.name(), &key[..16]))
}

fn encode_entry(key: &str, m: &Matrix, counts: &[usize]) -> Vec<u8> {
    let mut w = BlobWriter::new(CACHE_MAGIC, CACHE_VERSION);
    w.str(key);
    w.matrix(m);
    w.usizes(counts);
    w.finish()
}

fn decode_entry(bytes: &[u8], key: &str) -> Option<(Matrix, Vec<usize>)> {
    let (mut r, v) = BlobReader::open(bytes, CACHE_MAGIC).ok()?;
    if v != CACHE_VERSION || r.str().ok()? != key {
        return None;
    }
    let m = r.matrix().ok()?;
    let counts = r.usizes().ok()?;
    r.finish().ok()?;
    (counts.len() == m.rows()).then_some((m, counts))
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Writes through a temporary file and a rename so concurrent runs sharing a
/// cache never see a partial entry.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().expect("cache file has a parent");
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = dir.join(format!(
        ".tmp-{}-{}",
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// `pooled_matrix` behind the on-disk cache. Returns whether it was a hit.
pub fn cached_pooled(cfg: &RunConfig, ds: &LabeledDataset, digest: &str, s: FeatureSource) -> Result<(Matrix, Vec<usize>, bool)> {
    let key = cache_key(cfg, digest, s);
    let dir = cfg.cache_path();
    let file = cache_file(&dir, s, &key);
    if let Ok(bytes) = std::fs::read(&file) {
        if let Some((m, c)) = decode_entry(&bytes, &key) {
            if m.rows() == ds.len() {
                return Ok((m, c, true));
            }
        }
    }
    let (m, c) = pooled_matrix(cfg, ds, s)?;
    write_atomic(&file, &encode_entry(&key, &m, &c))?;
    Ok((m, c, false))
}

/// Fused-space width implied by a config, without extracting anything.
pub fn feature_dim(cfg: &RunConfig, data: &LoadedData) -> usize {
    cfg.sorted_sources()
        .iter()
        .map(|&s| match s {
            FeatureSource::Pixels => match &data.inputs {
                Inputs::Images(ds) => ds.images.first().map_or(0, |im| im.pixels().len()),
                Inputs::Vectors { x, .. } => x.cols(),
            },
            FeatureSource::Vgg => data.deep.as_ref().map_or(0, |(t, _)| t.dim()),
            FeatureSource::Sift => cfg.k_sift * crate::descriptors::SIFT_DIM,
            FeatureSource::Orb => cfg.k_orb * crate::descriptors::ORB_BITS,
        })
        .sum()
}
