use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::{DrScope, RunConfig};
use super::features::sha256_hex;
use crate::dataset::PixelStats;
use crate::metrics::ClassStats;
use crate::reduction::{Diagnostics, Method};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_train: usize,
    pub n_test: usize,
    pub n_classes: usize,
    pub train_class_counts: Vec<usize>,
    pub test_class_counts: Vec<usize>,
    pub sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deep_features_sha256: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub source: String,
    pub offset: usize,
    pub len: usize,
}

/// Keypoints found per image, before pooling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeypointSummary {
    pub source: String,
    pub mean: f64,
    pub min: usize,
    pub max: usize,
    pub images_without_keypoints: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockNormalization {
    pub source: String,
    pub mean: Vec<f64>,
    /// 0 marks a constant column (mapped to 0).
    pub std: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pixels: Option<PixelStats>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocks: Vec<BlockNormalization>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrSummary {
    pub method: Method,
    pub target_dim: usize,
    pub scope: DrScope,
    pub diagnostics: Diagnostics,
}

/// Everything that legitimately differs between two identical runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RuntimeInfo {
    /// Seconds per stage.
    pub timings: BTreeMap<String, f64>,
    /// Source name → whether its pooled features came from the cache.
    pub cache_hits: BTreeMap<String, bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: RunConfig,
    pub dataset: DatasetSummary,
    pub feature_dim: usize,
    pub layout: Vec<BlockSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keypoints: Vec<KeypointSummary>,
    pub accuracy: f64,
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<ClassStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reduction: Option<DrSummary>,
    pub normalization: Normalization,
    /// Choices the method description leaves open, with the value used.
    pub unstated_choices: BTreeMap<String, Value>,
    pub runtime: RuntimeInfo,
    pub canonical_sha256: String,
}

impl RunReport {
    /// The report as hashed: no runtime section, no output locations, no hash.
    pub fn canonical_value(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        let obj = v.as_object_mut().expect("report is an object");
        obj.remove("runtime");
        obj.remove("canonical_sha256");
        if let Some(cfg) = obj.get_mut("config").and_then(Value::as_object_mut) {
            cfg.remove("out");
            cfg.remove("cache_dir");
        }
        v
    }

    /// sha256 of the canonical JSON (sorted keys, shortest round-trip floats).
    pub fn canonical_hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(&self.canonical_value()).expect("value serializes"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
