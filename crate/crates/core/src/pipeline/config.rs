use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::ClassifierSpec;
use crate::descriptors::{OrbParams, SiftParams};
use crate::error::{Error, Result};
use crate::reduction::{Method, ReducerSpec};

pub const SCHEMA_VERSION: u32 = 1;

/// Per-image feature sources. `pixels` is the no-extraction baseline and
/// cannot be combined with the others.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSource {
    Pixels,
    Vgg,
    Sift,
    Orb,
}

impl FeatureSource {
    pub fn name(self) -> &'static str {
        match self {
            FeatureSource::Pixels => "pixels",
            FeatureSource::Vgg => "vgg",
            FeatureSource::Sift => "sift",
            FeatureSource::Orb => "orb",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrScope {
    /// Fit on the training split, map the test split out of sample.
    #[default]
    TrainOnly,
    /// Fit on both splits together; test rows take their own embedding.
    Transductive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// `emotion,pixels,Usage` CSV of 48×48 faces.
    FerCsv { path: PathBuf },
    /// Synthetic feature vectors, three classes with a ten-dimensional signal in
    /// sixty dimensions. Every `test_every`-th row is held out. Only the `pixels`
    /// source applies (the vectors themselves).
    SignalInNoise {
        n: usize,
        seed: u64,
        #[serde(default = "default_test_every")]
        test_every: usize,
    },
}

fn default_test_every() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub dataset: DatasetSpec,
    /// HYF1 file whose ids are dataset row indices.
    pub deep_features: Option<PathBuf>,
    pub sources: Vec<FeatureSource>,
    /// Pooled SIFT descriptors per image (K_s).
    pub k_sift: usize,
    /// Pooled ORB descriptors per image (K_o).
    pub k_orb: usize,
    pub sift: SiftParams,
    pub orb: OrbParams,
    /// `null` feeds the fused features to the classifier directly.
    pub reducer: Option<ReducerSpec>,
    pub classifier: ClassifierSpec,
    pub seed: u64,
    pub dr_scope: DrScope,
    pub out: PathBuf,
    /// Feature cache directory; `<out>/cache` when unset.
    pub cache_dir: Option<PathBuf>,
    /// Relative paths resolve against this directory (the config file's).
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            dataset: DatasetSpec::FerCsv {
                path: PathBuf::from("fer2013plus.csv"),
            },
            deep_features: None,
            sources: vec![FeatureSource::Vgg, FeatureSource::Sift, FeatureSource::Orb],
            k_sift: 16,
            k_orb: 16,
            sift: SiftParams::default(),
            orb: OrbParams::default(),
            reducer: Some(ReducerSpec::new(Method::Pca, 16)),
            classifier: ClassifierSpec::default(),
            seed: 0,
            dr_scope: DrScope::TrainOnly,
            out: PathBuf::from("runs/default"),
            cache_dir: None,
            base_dir: PathBuf::new(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        RunConfig::from_json(&text, base)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.out)
    }

    pub fn cache_path(&self) -> PathBuf {
        match &self.cache_dir {
            Some(c) => self.resolve(c),
            None => self.out_dir().join("cache"),
        }
    }

    pub fn has(&self, s: FeatureSource) -> bool {
        self.sources.contains(&s)
    }

    /// Sources in canonical order, without duplicates.
    pub fn sorted_sources(&self) -> Vec<FeatureSource> {
        let mut s = self.sources.clone();
        s.sort();
        s.dedup();
        s
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.sources.is_empty() {
            return Err(Error::Config("at least one source must be enabled".into()));
        }
        if self.has(FeatureSource::Pixels) && self.sorted_sources().len() > 1 {
            return Err(Error::Config("`pixels` is the baseline and cannot be combined with other sources".into()));
        }
        match &self.dataset {
            DatasetSpec::FerCsv { path } => {
                let p = self.resolve(path);
                if !p.is_file() {
                    return Err(Error::Config(format!("dataset file {} does not exist", p.display())));
                }
            }
            DatasetSpec::SignalInNoise { n, test_every, .. } => {
                if !self.has(FeatureSource::Pixels) {
                    return Err(Error::Config("synthetic vector datasets support only the `pixels` source".into()));
                }
                if *test_every < 2 || *n < 2 * test_every {
                    return Err(Error::Config(format!("need test_every >= 2 and n >= 2*test_every (n = {n})")));
                }
            }
        }
        if self.has(FeatureSource::Vgg) {
            let Some(p) = &self.deep_features else {
                return Err(Error::MissingDeepFeatures);
            };
            let p = self.resolve(p);
            if !p.is_file() {
                return Err(Error::Config(format!("deep-feature file {} does not exist", p.display())));
            }
        }
        if self.has(FeatureSource::Sift) && self.k_sift == 0 {
            return Err(Error::Config("k_sift must be at least 1".into()));
        }
        if self.has(FeatureSource::Orb) && self.k_orb == 0 {
            return Err(Error::Config("k_orb must be at least 1".into()));
        }
        if let Some(r) = &self.reducer {
            if r.target_dim == 0 {
                return Err(Error::Config("reducer target_dim must be at least 1".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let c = RunConfig::default();
        let back = RunConfig::from_json(&c.to_json(), "").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn empty_sources_rejected() {
        let c = RunConfig {
            dataset: DatasetSpec::SignalInNoise {
                n: 60,
                seed: 0,
                test_every: 5,
            },
            sources: vec![],
            ..Default::default()
        };
        assert!(c.validate().unwrap_err().is_validation());
    }

    #[test]
    fn vgg_without_file_points_to_exporter() {
        let dir = std::env::temp_dir();
        let csv = dir.join("hyfacial-config-test.csv");
        std::fs::write(&csv, "0,0,Training\n").unwrap();
        let c = RunConfig {
            dataset: DatasetSpec::FerCsv { path: csv },
            sources: vec![FeatureSource::Vgg],
            ..Default::default()
        };
        let e = c.validate().unwrap_err();
        assert!(matches!(e, Error::MissingDeepFeatures));
        assert!(e.to_string().contains("export --dataset"));
    }
}
