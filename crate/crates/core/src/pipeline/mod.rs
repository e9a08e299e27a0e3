//! Config-driven runs: extract, pool, fuse, reduce, classify, evaluate.

mod config;
mod features;
pub mod fixtures;
mod grid;
mod report;
mod run;

pub use config::{DatasetSpec, DrScope, FeatureSource, RunConfig, SCHEMA_VERSION};
pub use features::{cache_key, feature_dim, load, pooled_matrix, sha256_hex, Inputs, LoadedData};
pub use grid::{
    check_consistent, expand, run_ablation, run_cells, run_dim_sweep, table1, table2, Axis, AxisValues, CellResult,
    GridFile, GridTable, DEFAULT_SWEEP_DIMS, TABLE1_AXES, TABLE2_AXES,
};
pub use report::{
    BlockNormalization, BlockSummary, DatasetSummary, DrSummary, KeypointSummary, Normalization, RunReport, RuntimeInfo,
};
pub use run::{execute, run_pipeline, write_artifacts, RunArtifacts};
