use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    NotFound(PathBuf),

    #[error("cannot decode image {path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("cannot write {path}: {reason}")]
    Write { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid value for `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("config line {line}: {reason}")]
    ConfigSyntax { line: usize, reason: String },

    #[error("image {width}x{height} is smaller than the seed grid spacing {spacing:.1}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        spacing: f64,
    },

    #[error("raster dimensions {actual:?} do not match expected {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("label set is empty")]
    EmptyLabels,

    #[error("label {label} is out of range for a graph of {n} nodes")]
    LabelOutOfRange { label: usize, n: usize },

    #[error("boundary label selection needs at least 2 boundary nodes, got {0}")]
    TooFewBoundaryNodes(usize),

    #[error("saliency vector is empty")]
    EmptySaliency,

    #[error("ground truth {0} has no salient pixels")]
    EmptyGroundTruth(String),

    #[error("no matched pairs between {maps} and {gt}")]
    NoMatchedPairs { maps: PathBuf, gt: PathBuf },

    #[error("no readable images in {0}")]
    EmptyInput(PathBuf),

    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
