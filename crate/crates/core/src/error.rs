//! Pipeline-level error: module failures tagged with the stage that raised them.

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::classify::ClassifyError;
use crate::codec::CodecError;
use crate::dataset::DatasetError;
use crate::descriptors::DescriptorError;
use crate::fusion::FusionError;
use crate::metrics::MetricsError;
use crate::reduction::ReductionError;
use crate::selection::SelectionError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Load,
    Extract,
    Pool,
    Fuse,
    Reduce,
    Classify,
    Evaluate,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Load => "load",
            Stage::Extract => "extract",
            Stage::Pool => "pool",
            Stage::Fuse => "fuse",
            Stage::Reduce => "reduce",
            Stage::Classify => "classify",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(
        "the vgg source needs a deep-feature file: export one with the deep-export tool \
         (`export --dataset <csv> --layer <name> --out <file.hyf>`) and set `deep_features` in the config"
    )]
    MissingDeepFeatures,
    #[error("inconsistent grid: {0}")]
    InconsistentGrid(String),
    #[error("target dimension {d} must be below the fused feature dimension {max}")]
    DimTooLarge { d: usize, max: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{stage} stage: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: StageError,
    },
}

impl Error {
    /// Errors caused by the request itself rather than by a failing run (exit code 1).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::MissingDeepFeatures | Error::InconsistentGrid(_) | Error::DimTooLarge { .. }
        )
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_validation() {
            1
        } else {
            2
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Tags a module result with the stage it ran in.
pub(crate) trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, Error>;
}

impl<T, E: Into<StageError>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, Error> {
        self.map_err(|e| Error::Stage {
            stage,
            source: e.into(),
        })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
